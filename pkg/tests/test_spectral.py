import math

import numpy as np
import pytest
from scipy.integrate import quad

from wgnls.config import rng_for
from wgnls.spectral import (
    Field,
    MassLeakError,
    derivative_norms,
    lp_norm,
    make_grid,
    mass,
    random_smooth_field,
    read_field,
    resample_scale,
    workspace,
    write_field,
)

from conftest import gaussian, rel


def test_make_grid_spacings():
    g = make_grid(1, 20.0, 512, 64)
    assert g.hx == 0.078125
    assert g.hy == pytest.approx(2 * math.pi / 64, rel=1e-15)
    assert make_grid(2, 10.0, 128, 32).size == 524288


@pytest.mark.parametrize("args", [(1, -1.0, 512, 64), (1, 20.0, 511, 64), (1, 20.0, 512, 6), (3, 1.0, 8, 8)])
def test_make_grid_rejects(args):
    with pytest.raises(ValueError):
        make_grid(*args)


def test_wavenumber_tables():
    g = make_grid(1, 20.0, 16, 8)
    assert sorted(g.xi) == pytest.approx(list(math.pi / 20 * np.arange(-8, 8)))
    assert sorted(g.k) == list(range(-4, 4))


def test_zero_field_norms(desk):
    z = Field.zeros(desk)
    assert derivative_norms(z) == (0.0, 0.0)
    assert lp_norm(z, 3.0) == 0.0


def test_grady_equals_mass_for_unit_mode(desk):
    u = gaussian(desk, ky=1)
    gx, gy = derivative_norms(u)
    assert gy == pytest.approx(mass(u), rel=1e-13)


def test_gradx_of_gaussian_matches_quadrature():
    g = make_grid(1, 20.0, 512, 16)
    x, y = g.mesh()
    u = Field(g, np.broadcast_to(np.exp(-x**2), g.shape).astype(complex))
    oracle = 2 * math.pi * quad(lambda s: 4 * s * s * math.exp(-2 * s * s), -np.inf, np.inf, epsabs=1e-14)[0]
    assert rel(derivative_norms(u)[0], oracle) < 1e-12


def test_l2_of_gaussian_closed_form():
    g = make_grid(1, 20.0, 512, 16)
    x, y = g.mesh()
    u = Field(g, np.broadcast_to(np.exp(-x**2), g.shape).astype(complex))
    assert rel(lp_norm(u, 2), math.sqrt(2 * math.pi * math.sqrt(math.pi / 2))) < 1e-13


def test_lp_norm_grid_refinement():
    coarse = make_grid(1, 20.0, 512, 32)
    fine = make_grid(1, 20.0, 2048, 64)
    rng = np.random.default_rng(3)
    centres = rng.uniform(-3, 3, size=3)

    def f(g):
        x, y = g.mesh()
        v = sum(np.exp(-((x - c) ** 2) / 2) * (1 + 0.3 * np.cos((i + 1) * y)) for i, c in enumerate(centres))
        return Field(g, v.astype(complex))

    assert rel(lp_norm(f(coarse), 8.0), lp_norm(f(fine), 8.0)) < 1e-8


def test_parseval(desk):
    u = random_smooth_field(desk, rng_for(1, 0))
    m_fourier = workspace(desk).spectral_sums(u.values)[0]
    assert rel(lp_norm(u, 2) ** 2, m_fourier) < 1e-12


@pytest.mark.parametrize("shift", [(7, 0), (0, 5), (-31, 11)])
def test_derivative_norms_shift_invariant(desk, shift):
    u = random_smooth_field(desk, rng_for(2, 0))
    v = Field(desk, np.roll(u.values, shift, axis=(0, 1)))
    a, b = derivative_norms(u), derivative_norms(v)
    assert a == pytest.approx(b, rel=1e-12)


def test_resample_identity(desk):
    u = gaussian(desk)
    assert resample_scale(u, 1.0) is u


def test_resample_gaussian_laws(desk):
    u = gaussian(desk, width=1.5)
    v = resample_scale(u, 2.0)
    assert rel(mass(v), mass(u)) < 1e-10
    assert rel(derivative_norms(v)[0], 4 * derivative_norms(u)[0]) < 1e-8


@pytest.mark.parametrize("t", [0.5, 0.8, 1.3, 2.0])
def test_resample_round_trip(desk, t):
    u = gaussian(desk, width=1.0)
    back = resample_scale(resample_scale(u, t), 1 / t)
    assert np.linalg.norm(back.values - u.values) / np.linalg.norm(u.values) < 1e-8


def test_resample_leak_detected(desk):
    with pytest.raises(MassLeakError):
        resample_scale(gaussian(desk, width=4.0), 0.2)


def test_resample_outside_zero_mode(desk):
    u = gaussian(desk, width=4.0)
    v = resample_scale(u, 0.2, leak_tol=math.inf, outside="zero")
    x = desk.x
    assert np.all(v.values[np.abs(0.2 * x) >= desk.Lx] == 0)


def test_field_file_round_trip(tmp_path, desk):
    u = random_smooth_field(desk, rng_for(4, 0))
    path = tmp_path / "u.wgf"
    write_field(path, u, 6.0)
    raw = path.read_bytes()
    assert raw[:6] == b"WGNLS1"
    assert len(raw) == 6 + 1 + 8 + 8 + 8 + 8 + 16 * desk.size
    v, alpha = read_field(path)
    assert alpha == 6.0 and v.grid == desk
    assert np.array_equal(v.values, u.values)


def test_field_file_layout_y_fastest(tmp_path):
    g = make_grid(1, 1.0, 8, 8)
    vals = np.arange(64, dtype=float).reshape(8, 8) + 0j
    write_field(tmp_path / "a.wgf", Field(g, vals), 6.0)
    body = np.frombuffer((tmp_path / "a.wgf").read_bytes()[39:], dtype="<f8")
    assert body[0::2][:9].tolist() == list(range(9))


def test_read_field_rejects_bad_magic(tmp_path):
    (tmp_path / "bad").write_bytes(b"NOPE" + bytes(64))
    with pytest.raises(ValueError):
        read_field(tmp_path / "bad")


def test_field_rejects_nonfinite(desk):
    vals = np.zeros(desk.shape, dtype=complex)
    vals[0, 0] = np.nan
    with pytest.raises(ValueError):
        Field(desk, vals)
