"""
Split-step Fourier evolution of ``i u_t + Delta_{x,y} u = -|u|^alpha u``.

Strang splitting alternates the exact linear flow ``exp(-i dt (|xi|^2 + k^2))``
in Fourier space with the exact nonlinear flow ``u -> exp(i dt |u|^alpha) u``,
which leaves |u| unchanged pointwise. Both sub-flows are L2 isometries, so mass
is conserved to rounding.

Virial diagnostics use the weights ``|x|^2`` and ``a_R(x) = R^2 chi(|x|/R)``
where chi equals r^2 on [0, 1], vanishes on [2, inf) and is a quintic on
[1, 2] matching value, slope and curvature at both ends.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .functionals import DegenerateFieldError, ModelParams, evaluate
from .spectral import Field, Grid, mass, workspace, write_field

logger = logging.getLogger(__name__)

__all__ = [
    "EvolutionConfig",
    "EvolutionTrace",
    "VirialCheck",
    "TrappingPreconditionError",
    "cutoff",
    "strang_step",
    "evolve",
    "virial_series",
    "energy_trapping_check",
    "local_virial_terms",
    "soliton_data",
    "pre_blowup_window",
    "gaussian_data",
]

SCATTERING = "global_scattering_consistent"
BLOWUP = "blowup_detected"
UNDETERMINED = "undetermined"


class TrappingPreconditionError(ValueError):
    """Input does not satisfy ``H < m`` and ``K < 0``; not a counterexample."""


def _quintic_coeffs() -> np.ndarray:
    # q(1)=1, q'(1)=2, q''(1)=2, q(2)=q'(2)=q''(2)=0
    rows, rhs = [], []
    for r0, vals in ((1.0, (1.0, 2.0, 2.0)), (2.0, (0.0, 0.0, 0.0))):
        rows.append([r0**k for k in range(6)])
        rows.append([k * r0 ** (k - 1) if k >= 1 else 0.0 for k in range(6)])
        rows.append([k * (k - 1) * r0 ** (k - 2) if k >= 2 else 0.0 for k in range(6)])
        rhs.extend(vals)
    return np.linalg.solve(np.array(rows), np.array(rhs))


_Q = _quintic_coeffs()


def cutoff(r: np.ndarray, deriv: int = 0) -> np.ndarray:
    """chi(r) and its first two derivatives (``deriv`` in 0, 1, 2)."""
    r = np.asarray(r, dtype=float)
    poly = np.polynomial.Polynomial(_Q).deriv(deriv) if deriv else np.polynomial.Polynomial(_Q)
    inner = (r**2, 2 * r, 2 * np.ones_like(r))[deriv]
    out = np.where(r <= 1, inner, np.where(r < 2, poly(r), 0.0))
    return out


@dataclass
class EvolutionConfig:
    dt: float = 1e-3
    t_end: float = 1.0
    record_every: int = 10
    R: float = 5.0
    blowup_grad_factor: float = 1e3
    leak_tol: float = 1e-6
    scatter_pot_factor: float = 0.1
    energy_fail_tol: float = 1e-2
    checkpoint_every: int = 0
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be non-negative")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


COLUMNS = ("t", "M", "H", "K", "pot", "gradnorm", "V", "zR", "dzR", "AR")


@dataclass
class EvolutionTrace:
    columns: dict[str, np.ndarray]
    classification: str
    reason: str
    final: Field | None = field(default=None, repr=False)
    steps: int = 0

    def __getattr__(self, name):
        cols = self.__dict__.get("columns", {})
        if name in cols:
            return cols[name]
        raise AttributeError(name)

    def rows(self):
        n = len(self.columns["t"])
        for i in range(n):
            yield {k: float(self.columns[k][i]) for k in COLUMNS}

    def mass_drift(self) -> float:
        M = self.columns["M"]
        return float(np.max(np.abs(M - M[0])) / M[0]) if M[0] > 0 else 0.0

    def energy_drift(self) -> float:
        H = self.columns["H"]
        return float(np.max(np.abs(H - H[0])) / abs(H[0])) if H[0] != 0 else float(np.max(np.abs(H)))


def soliton_data(grid: Grid, p: ModelParams, c: float, dilation: float = 1.0,
                 y_perturb: float = 0.0) -> Field:
    """``t^{1/2} P(t x) (1 + eps cos y)`` rescaled to mass c, P the y-independent state.

    P is the closed-form profile of mass ``c/(2 pi)`` per unit y, so for
    ``eps = 0`` the data has mass c, ``H = H(P)(3t^2 - 2t^3)`` (alpha = 6) and
    K has the sign of ``1 - t``. The dilation is applied analytically.
    """
    from .ground_state import euclidean_reference, sech_profile

    if p.d != 1:
        raise NotImplementedError("closed-form profile is only available for d = 1")
    ref = euclidean_reference(c / (2 * math.pi), p)
    x, y = grid.mesh()
    t = float(dilation)
    vals = math.sqrt(t) * sech_profile(t * x, ref.omega, p.alpha) * (1.0 + y_perturb * np.cos(y))
    u = Field(grid, vals.astype(complex))
    return u * math.sqrt(c / mass(u))


def gaussian_data(grid: Grid, amplitude: float, width: float, y_perturb: float = 0.0) -> Field:
    """``A exp(-|x|^2/(2 w^2)) (1 + eps cos y)``."""
    r2 = grid.radius_sq()
    y = grid.mesh()[grid.d]
    vals = amplitude * np.exp(-r2 / (2 * width**2)) * (1.0 + y_perturb * np.cos(y))
    return Field(grid, np.broadcast_to(vals, grid.shape).astype(complex))


def _linear_multiplier(ws, dt: float) -> np.ndarray:
    return np.exp(-1j * dt * (ws.xi2 + ws.k2))


def strang_step(u: Field, dt: float, p: ModelParams) -> Field:
    """One Strang step: half linear, full nonlinear phase, half linear."""
    ws = workspace(u.grid)
    half = _linear_multiplier(ws, 0.5 * dt)
    v = ws.ifft(half * ws.fft(u.values))
    v = np.exp(1j * dt * np.abs(v) ** p.alpha) * v
    v = ws.ifft(half * ws.fft(v))
    if not np.all(np.isfinite(v)):
        raise FloatingPointError("non-finite values after a Strang step")
    return Field(u.grid, v)


def _grad(ws, Uh):
    return [ws.ifft(1j * ka * Uh) for ka in ws.xi_axes]


@lru_cache(maxsize=16)
def _cutoff_moments(grid: Grid, R: float) -> dict[str, np.ndarray]:
    """Quadrature vectors that integrate the trigonometric interpolant exactly.

    For each compactly supported weight w in {R^2 chi, R chi' sign(x), chi''}
    returns q with ``sum_j q_j f_j = int w(x) f_I(x) dx``, f_I the interpolant
    of the samples f_j. The weights are only C^2 at |x| = R, 2R, so plain grid
    sums converge at second order with a large constant; these do not.
    Only d = 1.
    """
    h, n, x0 = grid.hx, grid.Nx, grid.x[0]
    k = 2 * np.pi * np.fft.fftfreq(n, d=h)
    gl_x, gl_w = np.polynomial.legendre.leggauss(12)
    edge = min(2 * R, grid.Lx)
    knots = np.unique(np.clip([-2 * R, -R, 0.0, R, 2 * R], -edge, edge))
    nodes, wts = [], []
    for a, b in zip(knots[:-1], knots[1:]):
        m = max(1, int(np.ceil((b - a) / h)))
        edges = np.linspace(a, b, m + 1)
        mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
        nodes.append((mid[:, None] + half[:, None] * gl_x).ravel())
        wts.append((half[:, None] * gl_w).ravel())
    xq, wq = np.concatenate(nodes), np.concatenate(wts)
    s = np.abs(xq) / R
    weights = {
        "chi": R * R * cutoff(s),
        "a1": R * cutoff(s, 1) * np.sign(xq),
        "chi2": cutoff(s, 2),
    }
    phase = np.exp(1j * np.outer(k, xq - x0))
    nyq = n // 2 if n % 2 == 0 else None
    out = {}
    for name, wv in weights.items():
        W = phase @ (wq * wv)
        if nyq is not None:
            W[nyq] = W[nyq].real  # cosine convention at the Nyquist mode
        out[name] = np.real(np.fft.fft(W)) / n
    return out


def local_virial_terms(u: Field, p: ModelParams, R: float) -> dict[str, float]:
    """``V``, ``z_R``, ``dz_R/dt`` and the remainder ``A_R`` for one field.

    ``A_R = 4 Re int (a_jk - 2 delta_jk) d_j u d_k conj(u) - int Lap(a) Lap(|u|^2)
    - 2 alpha/(alpha+2) int (Lap(a) - 2d) |u|^{alpha+2}``; the bi-Laplacian
    term is integrated by parts once so that only second derivatives of the
    C^2 weight appear. For d = 1 the weighted integrals use
    :func:`_cutoff_moments`; for d = 2 they are grid sums.
    """
    g = u.grid
    ws = workspace(g)
    U = u.values
    w = g.weight
    rho = np.abs(U) ** 2
    Uh = ws.fft(U)
    grads = _grad(ws, Uh)
    lap_rho = np.real(ws.ifft(-ws.xi2 * ws.fft(rho)))
    nl = np.abs(U) ** (p.alpha + 2)
    V = float(np.sum(g.radius_sq() * rho) * w)
    flux = [np.imag(gj * np.conj(U)) for gj in grads]
    if g.d == 1:
        q = _cutoff_moments(g, float(R))

        def integ(name, f):
            # x by the exact moments, y by the (spectrally exact) trapezoid rule
            return float(q[name] @ (f.sum(axis=1) * g.hy))

        gx2 = np.abs(grads[0]) ** 2
        zR = integ("chi", rho)
        dz = 2.0 * integ("a1", flux[0])
        hess_term = integ("chi2", gx2) - 2.0 * float(np.sum(gx2) * w)
        bilap = integ("chi2", lap_rho)
        pot_term = integ("chi2", nl) - 2.0 * float(np.sum(nl) * w)
    else:
        xs = g.mesh()[: g.d]
        r = np.sqrt(g.radius_sq())
        s = r / R
        chi, chi1, chi2 = cutoff(s), cutoff(s, 1), cutoff(s, 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            # a'(r)/r with the r -> 0 limit 2
            a1_over_r = np.where(r > 0, R * chi1 / np.where(r > 0, r, 1.0), 2.0)
            ns = [np.where(r > 0, xj / np.where(r > 0, r, 1.0), 0.0) for xj in xs]
        lap_a = chi2 + (g.d - 1) * a1_over_r
        zR = float(np.sum(R * R * chi * rho) * w)
        dz = 2.0 * sum(float(np.sum(a1_over_r * xj * fj) * w) for xj, fj in zip(xs, flux))
        hess_term = 0.0
        for j in range(g.d):
            for k in range(g.d):
                ajk = (chi2 - a1_over_r) * ns[j] * ns[k] + (a1_over_r - 2.0 if j == k else 0.0)
                hess_term += float(np.sum(ajk * np.real(grads[j] * np.conj(grads[k]))) * w)
        bilap = float(np.sum(lap_a * lap_rho) * w)
        pot_term = float(np.sum((lap_a - 2 * g.d) * nl) * w)
    AR = 4 * hess_term - bilap - 2 * p.alpha / (p.alpha + 2) * pot_term
    return {"V": V, "zR": zR, "dzR": dz, "AR": AR}


def _edge_fraction(U, g) -> float:
    xs = g.mesh()[: g.d]
    edge = np.zeros(g.shape, dtype=bool)
    for c in xs:
        edge = edge | (np.abs(c) > 0.9 * g.Lx)
    dens = np.abs(U) ** 2
    tot = dens.sum()
    return float(dens[edge].sum() / tot) if tot > 0 else 0.0


def _record(U, g, p, R, t):
    u = Field(g, U)
    rep = evaluate(u, p)
    vt = local_virial_terms(u, p, R)
    return (t, rep.M, rep.H, rep.K, rep.pot, rep.gradx_sq + rep.grady_sq,
            vt["V"], vt["zR"], vt["dzR"], vt["AR"])


def evolve(u0: Field, p: ModelParams, cfg: EvolutionConfig | None = None) -> EvolutionTrace:
    """Integrate to ``cfg.t_end`` and classify the run.

    blowup_detected: the gradient norm grows by ``blowup_grad_factor`` or
    the step becomes unstable (non-finite values or relative energy drift
    above ``energy_fail_tol``) while the recorded V is strictly concave.
    global_scattering_consistent: t_end reached with K > 0 at every record and
    pot below ``scatter_pot_factor`` times its initial value.
    A boundary mass fraction above ``leak_tol`` stops the run (undetermined).
    """
    cfg = cfg or EvolutionConfig()
    g = u0.grid
    if not cfg.R < g.Lx:
        raise ValueError("R must be smaller than Lx")
    ws = workspace(g)
    half = _linear_multiplier(ws, 0.5 * cfg.dt)
    U = np.array(u0.values)
    rows = [_record(U, g, p, cfg.R, 0.0)]
    M0 = rows[0][1]
    if M0 == 0:
        cols = {k: np.array([v]) for k, v in zip(COLUMNS, rows[0])}
        return EvolutionTrace(cols, SCATTERING, "zero_data", u0, 0)
    H0, grad0, pot0 = rows[0][2], rows[0][5], rows[0][4]
    n_steps = int(round(cfg.t_end / cfg.dt))
    reason = "t_end"
    unstable = False
    step = 0
    ckdir = Path(cfg.checkpoint_dir) if cfg.checkpoint_dir else None
    if ckdir is not None:
        ckdir.mkdir(parents=True, exist_ok=True)
    for step in range(1, n_steps + 1):
        with np.errstate(over="raise", invalid="raise"):
            try:
                V = ws.ifft(half * ws.fft(U))
                V = np.exp(1j * cfg.dt * np.abs(V) ** p.alpha) * V
                V = ws.ifft(half * ws.fft(V))
            except FloatingPointError:
                reason, unstable = "overflow", True
                break
        if not np.all(np.isfinite(V)):
            reason, unstable = "overflow", True
            break
        U = V
        if step % cfg.record_every == 0 or step == n_steps:
            row = _record(U, g, p, cfg.R, step * cfg.dt)
            rows.append(row)
            if _edge_fraction(U, g) > cfg.leak_tol:
                reason = "boundary_leak"
                break
            if row[5] > cfg.blowup_grad_factor * grad0:
                reason = "gradient_growth"
                break
            if abs(row[2] - H0) > cfg.energy_fail_tol * max(abs(H0), 1e-300):
                reason, unstable = "energy_drift", True
                break
        if ckdir is not None and cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
            write_field(ckdir / f"checkpoint_{step:08d}.wgf", Field(g, U), p.alpha)
    cols = {k: np.array([r[i] for r in rows]) for i, k in enumerate(COLUMNS)}
    final = Field(g, U) if np.all(np.isfinite(U)) else None
    if reason in ("gradient_growth", "overflow", "energy_drift"):
        # Exclude the record that tripped the stability check from the concavity test.
        Vs = cols["V"][:-1] if unstable and len(cols["V"]) > 3 else cols["V"]
        concave = len(Vs) >= 3 and bool(np.all(np.diff(Vs, 2) < 0))
        cls = BLOWUP if concave else UNDETERMINED
    elif reason == "t_end":
        ok = bool(np.all(cols["K"] > 0)) and cols["pot"][-1] < cfg.scatter_pot_factor * pot0
        cls = SCATTERING if ok else UNDETERMINED
    else:
        cls = UNDETERMINED
    logger.info("evolve: %s after %d steps (%s)", cls, step, reason)
    return EvolutionTrace(cols, cls, reason, final, step)


@dataclass
class VirialCheck:
    glassey_err: float
    local_err: float
    n: int
    concave: bool


def virial_series(trace: EvolutionTrace, window: slice | None = None) -> VirialCheck:
    """Second differences of V and z_R against ``8K`` and ``8K + A_R``.

    Errors are maxima over interior samples relative to ``8|K|``.
    """
    c = trace.columns
    t = c["t"][window] if window is not None else c["t"]
    if len(t) < 5:
        raise ValueError("need at least 5 consecutive samples")
    dts = np.diff(t)
    if not np.allclose(dts, dts[0], rtol=1e-9):
        raise ValueError("samples must be uniformly spaced")
    h = dts[0]
    sl = window if window is not None else slice(None)
    V, z, K, A = c["V"][sl], c["zR"][sl], c["K"][sl], c["AR"][sl]
    ddV = np.diff(V, 2) / h**2
    ddz = np.diff(z, 2) / h**2
    K8 = 8 * K[1:-1]
    denom = np.abs(K8)
    g_err = float(np.max(np.abs(ddV - K8) / denom))
    l_err = float(np.max(np.abs(ddz - K8 - A[1:-1]) / denom))
    return VirialCheck(g_err, l_err, len(t), bool(np.all(np.diff(V, 2) < 0)))


def pre_blowup_window(trace: EvolutionTrace, growth: float = 2.0) -> slice:
    """Samples recorded before the gradient norm first exceeds ``growth`` times its initial value."""
    G = trace.columns["gradnorm"]
    above = np.nonzero(G > growth * G[0])[0]
    return slice(0, int(above[0]) if above.size else len(G))


def energy_trapping_check(u: Field, m_at_mass: float, p: ModelParams, tol: float = 1e-12) -> bool:
    """Whether ``K(u) <= H(u) - m`` for data with ``H < m`` and ``K < 0``."""
    rep = evaluate(u, p)
    if rep.M == 0:
        raise DegenerateFieldError("zero field")
    if not (rep.H < m_at_mass and rep.K < 0):
        raise TrappingPreconditionError(
            f"needs H < m and K < 0; got H={rep.H:.6g}, m={m_at_mass:.6g}, K={rep.K:.6g}"
        )
    return bool(rep.K <= rep.H - m_at_mass + tol * max(1.0, abs(rep.H), abs(m_at_mass)))
