import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wgnls.dynamics import (
    BLOWUP,
    SCATTERING,
    EvolutionConfig,
    TrappingPreconditionError,
    cutoff,
    energy_trapping_check,
    evolve,
    gaussian_data,
    local_virial_terms,
    pre_blowup_window,
    soliton_data,
    strang_step,
    virial_series,
)
from wgnls.functionals import DegenerateFieldError, ModelParams, evaluate
from wgnls.spectral import Field, make_grid, mass, read_field

from conftest import DESK_MASS, rel

THIN = make_grid(1, 20.0, 512, 16)


@pytest.mark.parametrize("deriv", [0, 1, 2])
@pytest.mark.parametrize("knot", [1.0, 2.0])
def test_cutoff_is_c2(deriv, knot):
    e = 1e-7
    lo, hi = cutoff(knot - e, deriv), cutoff(knot + e, deriv)
    assert abs(lo - hi) < 1e-4


def test_cutoff_shape():
    r = np.linspace(0, 1, 11)
    assert np.allclose(cutoff(r), r**2, rtol=0, atol=1e-15)
    assert np.all(cutoff(np.linspace(2, 5, 7)) == 0)
    # Derivatives are consistent with finite differences of chi.
    r = np.linspace(0.05, 2.4, 97)
    h = 1e-6
    assert np.allclose((cutoff(r + h) - cutoff(r - h)) / (2 * h), cutoff(r, 1), atol=1e-6)
    assert np.allclose((cutoff(r + h, 1) - cutoff(r - h, 1)) / (2 * h), cutoff(r, 2), atol=1e-5)


def test_config_validation():
    for kw in ({"dt": 0}, {"t_end": -1}, {"record_every": 0}):
        with pytest.raises(ValueError):
            EvolutionConfig(**kw)
    with pytest.raises(ValueError):
        evolve(gaussian_data(THIN, 0.1, 1.0), ModelParams(1, 6.0), EvolutionConfig(R=25.0))


def test_linear_limit_matches_free_gaussian(p16):
    # At amplitude 1e-4 the nonlinear phase is ~1e-24: the free flow is exact.
    g = make_grid(1, 40.0, 1024, 8)
    amp = 1e-4
    u0 = gaussian_data(g, amp, 1.0)
    x, y = g.mesh()
    u0 = Field(g, u0.values * np.exp(1j * y))
    u = u0
    for _ in range(10):
        u = strang_step(u, 0.1, p16)
    t = 1.0
    exact = amp * (1 + 2j * t) ** -0.5 * np.exp(-(x**2) / (2 * (1 + 2j * t))) * np.exp(1j * (y - t))
    assert np.max(np.abs(u.values - exact)) < 1e-12 * amp


def test_standing_wave_rotates_phase(p16):
    u0 = soliton_data(THIN, p16, DESK_MASS)
    tr = evolve(u0, p16, EvolutionConfig(dt=2.5e-4, t_end=0.2, record_every=200))
    assert tr.reason == "t_end"
    err = np.max(np.abs(tr.final.values - np.exp(1j * 0.2) * u0.values)) / np.max(np.abs(u0.values))
    assert err < 1e-5


def test_soliton_data_mass_and_virial_sign(p16):
    for t, sign in ((0.8, 1), (1.0, 0), (1.3, -1)):
        u = soliton_data(THIN, p16, 17.0, dilation=t)
        assert rel(mass(u), 17.0) < 1e-13
        K = evaluate(u, p16).K
        assert np.sign(round(K, 6)) == sign


def test_conservation_and_order_short(p16):
    u0 = gaussian_data(THIN, 0.7, 3.0, 0.1)
    tr = evolve(u0, p16, EvolutionConfig(dt=1e-3, t_end=0.5, record_every=100))
    assert tr.mass_drift() < 1e-12
    assert tr.energy_drift() < 1e-7

    def run(dt):
        u = u0
        for _ in range(int(round(0.5 / dt))):
            u = strang_step(u, dt, p16)
        return u.values

    a, b, c = run(0.02), run(0.01), run(0.005)
    ratio = np.linalg.norm(a - b) / np.linalg.norm(b - c)
    assert 3.2 <= ratio <= 4.8


def test_virial_identities(p16):
    u0 = gaussian_data(THIN, 0.7, 1.0, 0.2)
    tr = evolve(u0, p16, EvolutionConfig(dt=1e-4, t_end=0.02, record_every=5, R=1.0))
    vc = virial_series(tr)
    assert vc.glassey_err < 1e-6
    assert vc.local_err < 1e-5
    # The cutoff matters here, so the local check is not the Glassey one in disguise.
    assert np.max(np.abs(tr.AR)) > 0.5 * np.max(8 * np.abs(tr.K))


def test_local_weights_spectrally_accurate(p16):
    vals = []
    for nx in (512, 1024):
        g = make_grid(1, 20.0, nx, 16)
        u = gaussian_data(g, 0.7, 1.0, 0.2)
        vt = local_virial_terms(u, p16, 1.0)
        vals.append(8 * evaluate(u, p16).K + vt["AR"])
    assert abs(vals[0] - vals[1]) < 1e-9 * abs(vals[1])


@settings(max_examples=10, deadline=None)
@given(st.floats(0.5, 1.5), st.floats(0.0, 0.5))
def test_large_R_reduces_to_glassey(width, eps):
    p = ModelParams(1, 6.0)
    u = gaussian_data(THIN, 0.5, width, eps)
    vt = local_virial_terms(u, p, 9.0)
    assert abs(vt["zR"] - vt["V"]) <= 1e-12 * vt["V"]
    assert abs(vt["AR"]) <= 1e-9 * evaluate(u, p).gradx_sq


def test_virial_series_needs_samples(p16):
    tr = evolve(gaussian_data(THIN, 0.5, 1.0), p16, EvolutionConfig(dt=1e-3, t_end=0.003, record_every=1))
    with pytest.raises(ValueError):
        virial_series(tr)


def test_zero_data(p16):
    tr = evolve(Field.zeros(THIN), p16)
    assert tr.classification == SCATTERING and tr.reason == "zero_data"


def test_blowup_detected_for_negative_K(p16):
    u0 = soliton_data(THIN, p16, 17.0, dilation=1.5, y_perturb=0.05)
    tr = evolve(u0, p16, EvolutionConfig(dt=1e-3, t_end=1.0, record_every=5))
    assert tr.classification == BLOWUP
    win = pre_blowup_window(tr)
    vc = virial_series(tr, win)
    assert vc.concave
    assert vc.glassey_err < 1e-2


def test_trapping_preconditions(p16):
    u = soliton_data(THIN, p16, 17.0, dilation=1.5)
    rep = evaluate(u, p16)
    assert energy_trapping_check(u, rep.H + 1.0, p16)
    with pytest.raises(TrappingPreconditionError):
        energy_trapping_check(u, rep.H - 1.0, p16)
    with pytest.raises(TrappingPreconditionError):
        energy_trapping_check(soliton_data(THIN, p16, 17.0, dilation=0.8), 10.0, p16)
    with pytest.raises(DegenerateFieldError):
        energy_trapping_check(Field.zeros(THIN), 1.0, p16)


def test_checkpoints(p16, tmp_path):
    u0 = gaussian_data(THIN, 0.5, 1.0)
    cfg = EvolutionConfig(dt=1e-3, t_end=0.01, record_every=5, checkpoint_every=5, checkpoint_dir=str(tmp_path))
    tr = evolve(u0, p16, cfg)
    files = sorted(tmp_path.glob("*.wgf"))
    assert len(files) == 2
    v, alpha = read_field(files[-1])
    assert alpha == 6.0
    assert np.array_equal(v.values, tr.final.values)


def test_trace_rows(p16):
    tr = evolve(gaussian_data(THIN, 0.5, 1.0), p16, EvolutionConfig(dt=1e-3, t_end=0.01, record_every=5))
    rows = list(tr.rows())
    assert len(rows) == 3 and rows[-1]["t"] == pytest.approx(0.01)
    assert set(rows[0]) == set(tr.columns)
    assert math.isfinite(tr.H[-1])
