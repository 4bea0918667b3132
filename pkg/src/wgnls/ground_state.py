"""
Normalized ground states on the semivirial-vanishing manifold.

The minimizer of ``H_lam`` over ``{M = c, K = 0}`` is computed as the minimizer
over the mass sphere of the fibering energy

    E(u) = max_{t>0} H_lam(u^t) = lam*grady/2 + F(gradx, pot),

which has a closed form because ``H_lam(u^t)`` is an explicit function of t.
E is invariant along x-dilations, so the constraint K = 0 is only imposed at
the end by moving to the maximizing scale t*. Descent uses a Sobolev
preconditioner ``(sigma - t*^2 Delta_x - lam d_y^2)^{-1}`` and Polak-Ribiere
conjugate directions with an Armijo backtracking search.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import optimize, special

from .functionals import (
    FunctionalReport,
    ModelParams,
    DegenerateFieldError,
    evaluate,
    energy_lambda,
    fibering_energy,
    scale_ut,
)
from .spectral import Field, Grid, MassLeakError, make_grid, mass, resample_scale, workspace

logger = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "GroundStateSolution",
    "EuclideanReference",
    "initial_field",
    "minimize_mc",
    "minimize_mc_branches",
    "extract_beta",
    "pde_residual",
    "relative_residual",
    "euclidean_reference",
    "euclidean_energy",
    "reference_energy",
    "compare_with_euclidean",
    "edge_mass_fraction",
    "recenter",
]


@dataclass
class SolverConfig:
    grid: Grid = field(default_factory=lambda: make_grid(1, 20.0, 512, 64))
    init: str = "broken"  # "broken" | "symmetric"
    eps: float = 0.3
    width: float | None = None  # Gaussian x-width of the initial guess; default Lx/8
    initial: Field | None = None  # overrides init/eps/width when given
    tau0: float = 0.1
    tau_max: float = 4.0
    max_iter: int = 4000
    grad_tol: float = 1e-12
    stall_tol: float = 1e-18
    stall_steps: int = 20
    pde_tol: float = 1e-4
    k_tol: float = 1e-8
    leak_tol: float = 1e-6
    edge_tol: float = 1e-8
    method: str = "cg"  # "cg" | "sd"
    reproject_every: int = 200


@dataclass
class GroundStateSolution:
    u: Field
    c: float
    m: float
    beta: float
    lam: float
    residual_pde: float
    residual_K: float
    residual_cross: float
    grady_fraction: float
    iterations: int
    converged: bool
    report: FunctionalReport
    reason: str = ""
    residual_rel: float = math.nan
    grady_share: float = math.nan
    energy_history: list[float] = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__ if k not in ("u", "report", "energy_history")}
        out["report"] = self.report.as_dict()
        g = self.u.grid
        out["grid"] = {"d": g.d, "Lx": g.Lx, "Nx": g.Nx, "Ny": g.Ny}
        return out


@dataclass
class EuclideanReference:
    c: float
    omega: float
    wm: float
    profile: np.ndarray = field(repr=False)
    x: np.ndarray = field(repr=False)
    K: float = 0.0
    mass_sampled: float = 0.0


def initial_field(grid: Grid, mode: str = "broken", eps: float = 0.3, width: float | None = None) -> Field:
    """Gaussian in x, optionally modulated by ``1 + eps*cos(y)``."""
    w = grid.Lx / 8.0 if width is None else width
    r2 = grid.radius_sq()
    y = grid.mesh()[-1]
    if mode == "symmetric":
        mod = np.ones_like(y)
    elif mode == "broken":
        mod = 1.0 + eps * np.cos(y)
    else:
        raise ValueError(f"unknown init mode {mode!r}")
    return Field(grid, np.broadcast_to(np.exp(-r2 / (2 * w * w)) * mod, grid.shape))


def edge_mass_fraction(u: Field, band: float = 0.1) -> float:
    """Fraction of the mass in the outer ``band`` of the x-box."""
    g = u.grid
    xs = g.mesh()[: g.d]
    edge = np.zeros(g.shape, dtype=bool)
    for c in xs:
        edge = edge | (np.abs(c) > (1 - band) * g.Lx)
    dens = np.abs(u.values) ** 2
    tot = dens.sum()
    return float(dens[edge].sum() / tot) if tot > 0 else 0.0


def recenter(u: Field) -> Field:
    """Shift (circularly) so that max |u| sits at x = 0, y = 0."""
    g = u.grid
    idx = np.unravel_index(np.argmax(np.abs(u.values)), g.shape)
    shifts = [g.Nx // 2 - i for i in idx[: g.d]] + [-idx[g.d]]
    return Field(g, np.roll(u.values, shifts, axis=tuple(range(g.d + 1))))


def _project_to_fiber(u: Field, p: ModelParams, c: float, leak_tol: float | None) -> Field:
    # leak_tol=None marks an intermediate projection: no leak check, and nodes
    # mapped outside the box are zeroed rather than wrapped.
    ts = fibering_energy(*_xy_pot(u, p), p)[1]
    if leak_tol is None:
        v = resample_scale(u, ts, leak_tol=math.inf, outside="zero")
    else:
        v = scale_ut(u, ts, leak_tol=leak_tol)
    return v * math.sqrt(c / mass(v))


def _xy_pot(u: Field, p: ModelParams):
    ws = workspace(u.grid)
    _, gx, gy = ws.spectral_sums(u.values)
    pot = float(np.sum(np.abs(u.values) ** (p.alpha + 2)) * u.grid.weight)
    return gx, gy, pot


def minimize_mc(c: float, lam: float, p: ModelParams, cfg: SolverConfig | None = None) -> GroundStateSolution:
    """Minimize ``H_lam`` over mass ``c`` and vanishing semivirial."""
    cfg = cfg or SolverConfig()
    if not c > 0:
        raise ValueError(f"mass must be positive, got {c}")
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    g = cfg.grid
    if g.d != p.d:
        raise ValueError(f"grid has d={g.d} but params have d={p.d}")
    ws = workspace(g)
    w = g.weight
    a = p.alpha
    pw = p.fiber_power

    if cfg.initial is not None:
        u0 = cfg.initial
        if u0.grid != g:
            raise ValueError("initial field lives on a different grid")
        u = _project_to_fiber(u0 * math.sqrt(c / mass(u0)), p, c, None)
    else:
        # A dilated Gaussian is a Gaussian, so land on the fiber maximum exactly.
        w0 = g.Lx / 8.0 if cfg.width is None else cfg.width
        u0 = initial_field(g, cfg.init, cfg.eps, w0)
        u0 = u0 * math.sqrt(c / mass(u0))
        ts = fibering_energy(*_xy_pot(u0, p), p)[1]
        u = initial_field(g, cfg.init, cfg.eps, w0 / ts)
        u = u * math.sqrt(c / mass(u))
    U = np.array(u.values)

    def norms_from_hat(Uh):
        P = np.abs(Uh) ** 2
        s = w / g.size
        return float(P.sum() * s), float((ws.xi2 * P).sum() * s), float((ws.k2 * P).sum() * s)

    def dot(f, h):
        return float(np.real(np.vdot(h, f)) * w)

    xs = g.mesh()[: g.d]
    e1, e2 = pw / (pw - 2), 2 / (pw - 2)
    kF = (0.5 - 1 / pw) * ((a + 2) / pw) ** e2

    def F_of(A_, B_):
        return kF * A_**e1 * B_ ** (-e2)

    history: list[float] = []
    tau = cfg.tau0
    prev_dir = prev_z = prev_r = None
    stall = 0
    reason = "max_iter"
    it = 0
    res = math.inf
    for it in range(1, cfg.max_iter + 1):
        Uh = ws.fft(U)
        M, A, G = norms_from_hat(Uh)
        absU = np.abs(U)
        B = float(np.sum(absU ** (a + 2)) * w)
        E, ts = fibering_energy(A, G, B, p, lam)
        history.append(E)
        lin_h = (ts**2 * ws.xi2 + lam * ws.k2) * Uh
        nl = ts**pw * absU**a * U
        gE = ws.ifft(lin_h) - nl
        beta = (ts**pw * B - ts**2 * A - lam * G) / M
        r = gE + beta * U
        # Scale-free: both norms carry the same units under x-dilation.
        res = math.sqrt(dot(r, r) / dot(gE + nl, gE + nl))
        if res < cfg.grad_tol:
            reason = "gradient"
            break
        sigma = max(beta, 1e-2 * (ts**2 * A + lam * G) / M)
        z = ws.ifft(ws.fft(r) / (sigma + ts**2 * ws.xi2 + lam * ws.k2))
        z = z - (dot(z, U) / M) * U
        d = -z
        if cfg.method == "cg" and prev_dir is not None:
            gamma = max(0.0, dot(z, r - prev_r) / dot(prev_z, prev_r))
            d = -z + gamma * prev_dir
            d = d - (dot(d, U) / M) * U
        # Remove the dilation direction, along which E is flat.
        gen = 0.5 * g.d * U + sum(xa * ws.ifft(1j * ka * Uh) for xa, ka in zip(xs, ws.xi_axes))
        gg = dot(gen, gen)
        d = d - (dot(d, gen) / gg) * gen
        slope = dot(r, d)
        if slope >= 0:
            d = -z - (dot(-z, gen) / gg) * gen
            slope = dot(r, d)
        if slope >= 0:
            # What remains of the gradient lies along the dilation orbit.
            reason = "no_descent"
            break
        Dh = ws.fft(d)
        # Linear and quadratic pieces of the trial norms, so that energy
        # differences are resolved far below the rounding level of E.
        P1 = 2 * np.real(np.conj(Uh) * Dh)
        P2 = np.abs(Dh) ** 2
        sc = w / g.size
        m1, m2 = float(P1.sum() * sc), float(P2.sum() * sc)
        a1, a2 = float((ws.xi2 * P1).sum() * sc), float((ws.xi2 * P2).sum() * sc)
        g1, g2 = float((ws.k2 * P1).sum() * sc), float((ws.k2 * P2).sum() * sc)
        q1 = 2 * np.real(np.conj(U) * d)
        q2 = np.abs(d) ** 2
        U2 = absU**2
        Ua = absU ** (a + 2)
        accepted = False
        tau = min(cfg.tau_max, tau * 1.5)
        for _ in range(80):
            dM = tau * m1 + tau**2 * m2
            log_s2 = -math.log1p(dM / M)
            dA = tau * a1 + tau**2 * a2
            dG = tau * g1 + tau**2 * g2
            delta = tau * q1 + tau**2 * q2
            # log1p/expm1 where the relative change is small; plain difference
            # elsewhere (also covers underflowed tails).
            small = np.abs(delta) < 0.5 * U2
            with np.errstate(divide="ignore", invalid="ignore"):
                acc = Ua * np.expm1(0.5 * (a + 2) * np.log1p(np.where(small, delta / np.where(small, U2, 1.0), 0.0)))
            direct = np.abs(U + tau * d) ** (a + 2) - Ua
            dB_loc = np.where(small, acc, direct)
            dB = float(dB_loc.sum() * w)
            if not math.isfinite(dB):
                tau *= 0.5
                continue
            lr_A = log_s2 + math.log1p(dA / A)
            lr_B = 0.5 * (a + 2) * log_s2 + math.log1p(dB / B)
            dF = F_of(A, B) * math.expm1(e1 * lr_A - e2 * lr_B)
            dGs = G * math.expm1(log_s2) + math.exp(log_s2) * dG
            dE = 0.5 * lam * dGs + dF
            log_tv = math.log(ts) + (lr_A - lr_B) / (pw - 2)
            # E ignores dilations, so cap the drift along the fiber per step.
            if dE <= 1e-4 * tau * slope and abs(log_tv) < 0.5:
                accepted = True
                break
            tau *= 0.5
        if not accepted:
            reason = "line_search"
            break
        V = (U + tau * d) * math.exp(0.5 * log_s2)
        Ev = E + dE
        rel = -dE / max(abs(E), 1e-300)
        stall = stall + 1 if rel < cfg.stall_tol else 0
        U = V
        prev_dir, prev_z, prev_r = d, z, r
        if stall >= cfg.stall_steps:
            reason = "stalled"
            break
        if it % cfg.reproject_every == 0 or abs(math.log(ts)) > 0.05:
            U = np.array(_project_to_fiber(Field(g, U), p, c, None).values)
            prev_dir = None

    u = _project_to_fiber(Field(g, U), p, c, cfg.leak_tol)
    if edge_mass_fraction(u) > cfg.edge_tol:
        raise MassLeakError(
            f"minimizer carries {edge_mass_fraction(u):.2e} of its mass near the box edge"
        )
    return _package(u, c, lam, p, cfg, it, reason, history)


def minimize_mc_branches(c: float, lam: float, p: ModelParams, cfg: SolverConfig | None = None) -> GroundStateSolution:
    """Run the broken and the y-symmetric initializations; keep the lower energy."""
    cfg = cfg or SolverConfig()
    sols, errors = [], []
    for mode in ("broken", "symmetric"):
        sub = SolverConfig(**{**cfg.__dict__, "init": mode, "initial": None})
        try:
            sols.append(minimize_mc(c, lam, p, sub))
        except MassLeakError as exc:
            logger.warning("%s branch at c=%.6g lam=%.6g: %s", mode, c, lam, exc)
            errors.append(exc)
    if not sols:
        raise errors[0]
    conv = [s for s in sols if s.converged] or sols
    return min(conv, key=lambda s: s.m)


def _package(u, c, lam, p, cfg, it, reason, history) -> GroundStateSolution:
    rep = evaluate(u, p)
    m, _ = energy_lambda(u, lam, p)
    beta, cross = extract_beta(u, lam, p)
    res_pde, _ = pde_residual(u, beta, lam, p)
    res_rel = relative_residual(u, beta, lam, p)
    res_K = abs(rep.K) / (rep.gradx_sq + p.virial_coef * rep.pot)
    gfrac = rep.grady_sq / (rep.gradx_sq + rep.grady_sq + rep.M)
    share = lam * rep.grady_sq / (rep.gradx_sq + lam * rep.grady_sq)
    converged = res_rel <= cfg.pde_tol and res_K <= cfg.k_tol
    logger.info(
        "minimize_mc c=%.6g lam=%.6g: m=%.12g beta=%.6g res=%.2e gfrac=%.2e (%d it, %s)",
        c, lam, m, beta, res_pde, gfrac, it, reason,
    )
    return GroundStateSolution(
        u=u, c=c, m=m, beta=beta, lam=lam, residual_pde=res_pde, residual_K=res_K,
        residual_cross=cross, grady_fraction=gfrac, iterations=it, converged=converged,
        report=rep, reason=reason, residual_rel=res_rel, grady_share=share, energy_history=history,
    )


def extract_beta(u: Field, lam: float, p: ModelParams) -> tuple[float, float]:
    """Frequency from testing the standing-wave equation with u.

    Returns ``(beta, residual_cross)`` where the cross residual measures the
    identity ``lam*grady + beta*M = (2 alpha + 4 - alpha d)/(2(alpha+2)) pot``
    relative to pot.
    """
    rep = evaluate(u, p)
    if rep.M == 0:
        raise DegenerateFieldError("extract_beta of the zero field")
    beta = (rep.pot - rep.gradx_sq - lam * rep.grady_sq) / rep.M
    a, d = p.alpha, p.d
    coef = (2 * a + 4 - a * d) / (2 * (a + 2))
    cross = abs(lam * rep.grady_sq + beta * rep.M - coef * rep.pot) / rep.pot if rep.pot > 0 else 0.0
    return beta, cross


def pde_residual(u: Field, beta: float, lam: float, p: ModelParams) -> tuple[float, bool]:
    """Relative L2 residual of ``-Delta_x u - lam d_y^2 u + beta u - |u|^alpha u``.

    Normalized by ``||u||_{H^1}``. Returns ``(residual, degenerate)``; the zero
    field gives ``(0.0, True)``.
    """
    g = u.grid
    ws = workspace(g)
    U = u.values
    Uh = ws.fft(U)
    M, A, G = ws.spectral_sums(U)
    h1 = M + A + G
    if h1 == 0:
        return 0.0, True
    r = ws.ifft((ws.xi2 + lam * ws.k2) * Uh) + beta * U - np.abs(U) ** p.alpha * U
    return float(math.sqrt(np.sum(np.abs(r) ** 2) * g.weight / h1)), False


def relative_residual(u: Field, beta: float, lam: float, p: ModelParams) -> float:
    """Standing-wave residual relative to the size of its three terms.

    Unlike :func:`pde_residual` this is invariant under the rescalings that
    map one mass to another, so one tolerance serves every mass.
    """
    g = u.grid
    ws = workspace(g)
    U = u.values
    lin = ws.ifft((ws.xi2 + lam * ws.k2) * ws.fft(U))
    nl = np.abs(U) ** p.alpha * U
    r = lin + beta * U - nl
    scale = np.linalg.norm(lin) + abs(beta) * np.linalg.norm(U) + np.linalg.norm(nl)
    return float(np.linalg.norm(r) / scale) if scale > 0 else 0.0


# ---------------------------------------------------------------------------
# Euclidean problem on R^d


def _sech_constants(p: ModelParams):
    a = p.alpha
    q = 2.0 / a
    b_mass = special.beta(q, 0.5)
    b_pot = special.beta(1.0 + q, 0.5)
    return a, q, b_mass, b_pot


def _sech_norms(omega: float, p: ModelParams):
    """Exact (M, gradx, pot) of P_omega = A sech^{2/alpha}(kappa x) on R."""
    a, q, bm, bp = _sech_constants(p)
    amp = ((a + 2) * omega / 2.0) ** (1.0 / a)
    kap = a * math.sqrt(omega) / 2.0
    M = amp**2 / kap * bm
    pot = amp ** (a + 2) / kap * bp
    gx = amp**2 * q * q * kap * (bm - special.beta(q + 1.0, 0.5))
    return M, gx, pot


def sech_profile(x: np.ndarray, omega: float, alpha: float) -> np.ndarray:
    amp = ((alpha + 2) * omega / 2.0) ** (1.0 / alpha)
    z = np.abs(alpha * math.sqrt(omega) * np.asarray(x) / 2.0)
    # sech z = 2 e^{-z} / (1 + e^{-2z}) avoids overflow in cosh for large |x|.
    sech = 2.0 * np.exp(-z) / (1.0 + np.exp(-2.0 * z))
    return amp * sech ** (2.0 / alpha)


def euclidean_energy(c: float, p: ModelParams, grid: Grid | None = None) -> float:
    """The Euclidean ground-state level wm_c."""
    return euclidean_reference(c, p, grid).wm


def reference_energy(c: float, p: ModelParams, grid: Grid | None = None) -> float:
    """Energy of the best y-independent state of mass c: ``2 pi wm_{c/(2 pi)}``."""
    return 2.0 * math.pi * euclidean_energy(c / (2.0 * math.pi), p, grid)


def euclidean_reference(c: float, p: ModelParams, grid: Grid | None = None) -> EuclideanReference:
    """Ground state of mass c for the focusing NLS on R^d.

    d = 1 uses the explicit sech profile with omega found by root-finding on
    its mass; d = 2 solves the y-independent problem on ``grid`` (mass 2*pi*c,
    symmetric initial guess) and divides by the torus length.
    """
    if not c > 0:
        raise ValueError(f"mass must be positive, got {c}")
    if p.d == 1:
        def f(logw):
            return math.log(_sech_norms(math.exp(logw), p)[0]) - math.log(c)

        lo, hi = -50.0, 50.0
        if f(lo) * f(hi) > 0:
            raise RuntimeError(f"could not bracket omega for mass {c}")
        logw = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        omega = math.exp(logw)
        M, gx, pot = _sech_norms(omega, p)
        wm = 0.5 * gx - pot / (p.alpha + 2)
        K = gx - p.virial_coef * pot
        x = grid.x if grid is not None else np.linspace(-20, 20, 513)[:-1]
        prof = sech_profile(x, omega, p.alpha)
        ms = float(np.sum(prof**2) * (x[1] - x[0]))
        return EuclideanReference(c=c, omega=omega, wm=wm, profile=prof, x=x, K=K, mass_sampled=ms)
    if grid is None:
        grid = make_grid(2, 10.0, 128, 8)
    g8 = make_grid(grid.d, grid.Lx, grid.Nx, 8)
    sol = minimize_mc(2 * math.pi * c, 1.0, p, SolverConfig(grid=g8, init="symmetric"))
    if not sol.converged:
        raise RuntimeError(f"Euclidean reference did not converge for c={c}")
    prof = np.real(sol.u.values[..., 0])
    return EuclideanReference(
        c=c, omega=sol.beta, wm=sol.m / (2 * math.pi), profile=prof, x=grid.x,
        K=sol.report.K / (2 * math.pi), mass_sampled=sol.report.M / (2 * math.pi),
    )


def compare_with_euclidean(sol: GroundStateSolution, p: ModelParams) -> float:
    """``2 pi wm_{c/2pi} - m``; positive means y-dependence lowers the energy."""
    return reference_energy(sol.c, p, sol.u.grid) - sol.m
