"""
Thresholds for y-dependence of ground states.

The operator ``T_b u = b^{2/alpha} u(b x, y)`` maps the problem at mass c and
torus weight lam to the problem at mass ``b^{4/alpha - d} c`` and weight
``lam * b^2``, with energies related by ``b^{2 + 4/alpha - d}``. The family
``{(c, lam)}`` therefore collapses to a single parameter

    Lambda = lam * (c / c_ref)^{2 alpha/(alpha d - 4)},

and the threshold is a single number. Solves at mass c run on a grid whose
x-box is scaled by the same law, which is exactly equivalent to the solve at
the reference mass on the base grid.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .functionals import MeiCurve, ModelParams
from .ground_state import (
    GroundStateSolution,
    SolverConfig,
    euclidean_reference,
    minimize_mc,
    minimize_mc_branches,
    reference_energy,
)
from .spectral import Grid, make_grid

logger = logging.getLogger(__name__)

__all__ = [
    "BifurcationResult",
    "RhoCertificate",
    "SweepPoint",
    "ClassifierDisagreement",
    "lambda_exponent",
    "energy_exponent",
    "desk_mass",
    "grid_for_mass",
    "solve_at_mass",
    "sweep_m1_lambda",
    "classify",
    "find_lambda_star",
    "c_star_from_lambda",
    "c_star_from_lambda_literal",
    "linear_threshold",
    "rho_certificate",
    "mc_curve",
    "rescaling_check",
]


class ClassifierDisagreement(RuntimeError):
    """Energy gap and y-gradient fraction classify a point differently."""


def lambda_exponent(p: ModelParams) -> float:
    """Exponent e in ``Lambda = lam * c^e`` (the invariant combination)."""
    return 2 * p.alpha / (p.alpha * p.d - 4)


def energy_exponent(p: ModelParams) -> float:
    """Exponent f in ``m_{c,lam} = c^{-f} m_{1, lam c^e}``."""
    return (2 * p.alpha + 4 - p.alpha * p.d) / (p.alpha * p.d - 4)


def desk_mass(p: ModelParams, grid: Grid | None = None) -> float:
    """Mass of the y-independent ground state with frequency 1.

    Closed form for d = 1; for d = 2 one y-independent solve on ``grid``
    followed by the frequency scaling ``mass ~ omega^{2/alpha - d/2}``.
    """
    if p.d == 1:
        from .ground_state import _sech_norms

        return 2 * math.pi * _sech_norms(1.0, p)[0]
    g = grid or make_grid(2, 10.0, 128, 8)
    ref = euclidean_reference(10.0, p, g)
    return 2 * math.pi * 10.0 * ref.omega ** (-(2 / p.alpha - p.d / 2))


def grid_for_mass(c: float, p: ModelParams, base: Grid, c_ref: float | None = None) -> Grid:
    """``base`` with its x-box rescaled for mass c (exact discrete equivalence)."""
    c_ref = desk_mass(p, base) if c_ref is None else c_ref
    return base.with_Lx(base.Lx * (c / c_ref) ** (p.alpha / (p.alpha * p.d - 4)))


def solve_at_mass(
    c: float, lam: float, p: ModelParams, cfg: SolverConfig | None = None,
    c_ref: float | None = None, both_branches: bool = True,
) -> GroundStateSolution:
    """Minimize at mass c on the rescaled copy of ``cfg.grid``."""
    cfg = cfg or SolverConfig()
    g = grid_for_mass(c, p, cfg.grid, c_ref)
    sub = SolverConfig(**{**cfg.__dict__, "grid": g, "initial": None,
                          "width": None if cfg.width is None else cfg.width * g.Lx / cfg.grid.Lx})
    if both_branches:
        return minimize_mc_branches(c, lam, p, sub)
    return minimize_mc(c, lam, p, sub)


@dataclass
class SweepPoint:
    lam: float
    m: float
    grady_fraction: float
    converged: bool
    residual_pde: float = math.nan
    grady_share: float = math.nan
    error: str = ""

    def row(self) -> dict:
        return {"lambda": self.lam, "m1_lambda": self.m, "grady_fraction": self.grady_fraction,
                "converged": self.converged, "grady_share": self.grady_share}


def _sweep_one(args) -> SweepPoint:
    lam, p, cfg, c_ref = args
    try:
        s = solve_at_mass(1.0, lam, p, cfg, c_ref)
        return SweepPoint(lam, s.m, s.grady_fraction, s.converged, s.residual_pde, grady_share=s.grady_share)
    except Exception as exc:  # isolated per point
        return SweepPoint(lam, math.nan, math.nan, False, error=f"{type(exc).__name__}: {exc}")


def sweep_m1_lambda(lams, p: ModelParams, cfg: SolverConfig | None = None, workers: int = 1,
                    c_ref: float | None = None) -> list[SweepPoint]:
    """m_{1,lam} and the y-gradient fraction for each lam (mass 1)."""
    lams = [float(v) for v in lams]
    if not lams:
        raise ValueError("empty lambda list")
    if any(v <= 0 for v in lams):
        raise ValueError("lambda values must be positive")
    cfg = cfg or SolverConfig()
    c_ref = desk_mass(p, cfg.grid) if c_ref is None else c_ref
    jobs = [(v, p, cfg, c_ref) for v in lams]
    if workers <= 1:
        return [_sweep_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_sweep_one, jobs))


def classify(pt: SweepPoint, reference: float, energy_tol: float = 1e-9, grady_tol: float = 1e-8) -> bool:
    """True when the point has a genuinely y-dependent minimizer.

    Both tests must agree: energy gap above ``3 * energy_tol * reference`` and
    y-gradient share ``lam*grady/(gradx + lam*grady)`` above ``grady_tol``.
    The share is used instead of ``grady_fraction`` because it does not
    depend on which mass the problem is posed at.
    """
    by_energy = reference - pt.m > 3 * energy_tol * reference
    by_grady = pt.grady_share > grady_tol
    if by_energy != by_grady:
        raise ClassifierDisagreement(
            f"lam={pt.lam:.6g}: gap={(reference - pt.m) / reference:.3e} (rel), "
            f"grady_share={pt.grady_share:.3e}"
        )
    return by_energy


@dataclass
class BifurcationResult:
    lambda_star_bracket: tuple[float, float]
    c_star_bracket: tuple[float, float]
    reference: float
    sweep: list[SweepPoint] = field(default_factory=list)
    lambda_linear: float = math.nan

    def summary(self) -> dict:
        return {
            "lambda_star_bracket": list(self.lambda_star_bracket),
            "c_star_bracket": list(self.c_star_bracket),
            "reference": self.reference,
            "lambda_linear": self.lambda_linear,
            "sweep": [pt.row() for pt in self.sweep],
        }


def linear_threshold(p: ModelParams) -> float:
    """Weight at which the y-independent state at mass 1 loses stability.

    The second variation of ``H_lam + beta M/2`` at ``Q(x)`` in the direction
    ``v(x) cos y`` is ``<(L_+ + lam) v, v>``; the lowest eigenvalue of
    ``L_+ = -dx^2 + w - (alpha+1) Q^alpha`` is ``-w ((alpha+2)^2/4 - 1)`` with
    eigenfunction ``Q^{(alpha+2)/2}``. Only d = 1 is available in closed form.
    """
    if p.d != 1:
        raise NotImplementedError("closed-form L_+ spectrum is only available for d = 1")
    omega = euclidean_reference(1.0 / (2 * math.pi), p).omega
    return omega * ((p.alpha + 2) ** 2 / 4 - 1)


def find_lambda_star(
    p: ModelParams, cfg: SolverConfig | None = None, bracket_tol: float = 1e-2,
    lam_range: tuple[float, float] | None = None, n_sweep: int = 6, workers: int = 1,
    energy_tol: float = 1e-9, grady_tol: float = 1e-8,
) -> BifurcationResult:
    """Bracket lambda_* for mass 1 by a geometric sweep and bisection.

    ``lam_range`` defaults to ``[2, 64]`` times the frequency of the
    y-independent state of mass 1, the natural unit of lam.
    """
    cfg = cfg or SolverConfig()
    c_ref = desk_mass(p, cfg.grid)
    reference = reference_energy(1.0, p, grid_for_mass(1.0, p, cfg.grid, c_ref))
    if lam_range is None:
        if p.d == 1:
            w1 = euclidean_reference(1.0 / (2 * math.pi), p).omega
        else:
            w1 = (1.0 / c_ref) ** (1 / (2 / p.alpha - p.d / 2))
        lam_range = (2 * w1, 64 * w1)
    lams = np.geomspace(lam_range[0], lam_range[1], n_sweep)
    sweep = sweep_m1_lambda(lams, p, cfg, workers, c_ref)
    flags = []
    for pt in sweep:
        if not pt.converged:
            logger.warning("sweep point lam=%.6g did not converge (%s)", pt.lam, pt.error or "max_iter")
            flags.append(None)
        else:
            flags.append(classify(pt, reference, energy_tol, grady_tol))
    known = [(pt, f) for pt, f in zip(sweep, flags) if f is not None]
    if all(f for _, f in known):
        raise RuntimeError("every sweep point is y-dependent; extend lam_range upward")
    if not any(f for _, f in known):
        raise RuntimeError("every sweep point is y-independent; extend lam_range downward")
    lo = hi = None
    for (a, fa), (b, fb) in zip(known[:-1], known[1:]):
        if fa and not fb:
            lo, hi = a.lam, b.lam
            break
    if lo is None:
        raise RuntimeError("classifier is not monotone across the sweep")
    while hi / lo - 1 > bracket_tol:
        mid = math.sqrt(lo * hi)
        pt = _sweep_one((mid, p, cfg, c_ref))
        if not pt.converged:
            raise RuntimeError(f"bisection point lam={mid:.6g} did not converge: {pt.error}")
        sweep.append(pt)
        if classify(pt, reference, energy_tol, grady_tol):
            lo = mid
        else:
            hi = mid
    sweep.sort(key=lambda q: q.lam)
    try:
        lin = linear_threshold(p)
    except NotImplementedError:
        lin = math.nan
    return BifurcationResult((lo, hi), c_star_from_lambda((lo, hi), p), reference, sweep, lin)


def c_star_from_lambda(bracket, p: ModelParams) -> tuple[float, float]:
    """Mass interval equivalent to a lam-bracket at mass 1.

    ``m_c = c^{-f} m_{1, c^e}``, so ``c = lam^{1/e}``; the map is increasing.
    """
    e = lambda_exponent(p)
    lo, hi = bracket
    if not 0 < lo <= hi:
        raise ValueError("bracket must satisfy 0 < lo <= hi")
    return lo ** (1 / e), hi ** (1 / e)


def c_star_from_lambda_literal(bracket, p: ModelParams) -> tuple[float, float]:
    """The decreasing map ``c = lam^{-(2 + 4/alpha - d)/2}``.

    Kept to document that it does not preserve mass; see :func:`rescaling_check`.
    """
    s = (2 + 4 / p.alpha - p.d) / 2
    lo, hi = bracket
    return hi ** (-s), lo ** (-s)


# ---------------------------------------------------------------------------
# Explicit certificate for small lam


@dataclass
class RhoCertificate:
    a: float
    h: float
    y: np.ndarray = field(repr=False)
    rho: np.ndarray = field(repr=False)
    rho_l2: float
    rho_pot: float
    K_psi: float
    K_rel: float
    psi_energy: float
    reference: float

    @property
    def margin(self) -> float:
        return self.reference - self.psi_energy


def _rho_window(p: ModelParams) -> tuple[float, float]:
    lo = math.pi - 3 * math.pi * (3 / (p.alpha + 3)) ** (2 / p.alpha)
    return max(lo, 0.0), math.pi


def _rho(y, a, h):
    y = np.asarray(y, dtype=float)
    s = h / (math.pi - a)
    return np.where(y <= a, 0.0,
                    np.where(y <= math.pi, s * (y - a),
                             np.where(y <= 2 * math.pi - a, s * (2 * math.pi - a - y), 0.0)))


def _gauss_integral(f, a: float, b: float, n: int = 12) -> float:
    xg, wg = np.polynomial.legendre.leggauss(n)
    y = 0.5 * (b - a) * xg + 0.5 * (a + b)
    return float(0.5 * (b - a) * np.sum(wg * f(y)))


def rho_certificate(p: ModelParams, a: float | None = None, ny: int = 512) -> RhoCertificate:
    """Tent profile in y combined with the Euclidean optimizer in x.

    rho vanishes off ``[a, 2 pi - a]`` and peaks at ``h = ((alpha+3)/3)^{1/alpha}``
    at ``y = pi``, so that ``||rho||_2^2 = ||rho||_{alpha+2}^{alpha+2}``. The
    integrals of powers of rho are polynomial on each linear piece and are
    evaluated by Gauss-Legendre quadrature, which is exact at this degree.
    """
    lo, hi = _rho_window(p)
    if a is None:
        a = 0.5 * (lo + hi)
    if not (lo < a < hi):
        raise ValueError(f"a={a} outside the admissible window ({lo:.6g}, {hi:.6g})")
    h = ((p.alpha + 3) / 3) ** (1 / p.alpha)
    n = int(math.ceil((p.alpha + 2) / 2)) + 2
    pieces = [(a, math.pi), (math.pi, 2 * math.pi - a)]
    l2 = sum(_gauss_integral(lambda y: _rho(y, a, h) ** 2, *pc, n=n) for pc in pieces)
    pot = sum(_gauss_integral(lambda y: _rho(y, a, h) ** (p.alpha + 2), *pc, n=n) for pc in pieces)
    ref = euclidean_reference(1.0 / l2, p)
    if p.d == 1:
        from .ground_state import _sech_norms

        _, gx, pp = _sech_norms(ref.omega, p)
    else:
        raise NotImplementedError("rho certificate needs the closed-form profile (d = 1)")
    K = l2 * gx - p.virial_coef * pot * pp
    K_rel = abs(K) / (l2 * gx + p.virial_coef * pot * pp)
    energy = 0.5 * l2 * gx - pot * pp / (p.alpha + 2)
    y = np.linspace(0, 2 * math.pi, ny, endpoint=False)
    return RhoCertificate(a=a, h=h, y=y, rho=_rho(y, a, h), rho_l2=l2, rho_pot=pot, K_psi=K,
                          K_rel=K_rel, psi_energy=energy,
                          reference=reference_energy(1.0, p))


# ---------------------------------------------------------------------------
# The curve c -> m_c


def mc_curve(c_list, p: ModelParams, cfg: SolverConfig | None = None, noise: float = 1e-9,
             verify: bool = False, workers: int = 1) -> tuple[MeiCurve, list[dict]]:
    """Sample m_c and check positivity and monotonicity.

    With ``verify`` each knot is also compared with an independent solve of
    the equivalent mass-1 problem via :func:`rescaling_check`.
    """
    cs = [float(c) for c in c_list]
    if not cs or any(c <= 0 for c in cs) or any(b <= a for a, b in zip(cs[:-1], cs[1:])):
        raise ValueError("c_list must be positive and strictly increasing")
    cfg = cfg or SolverConfig()
    c_ref = desk_mass(p, cfg.grid)
    jobs = [(c, 1.0, p, cfg, c_ref) for c in cs]
    if workers <= 1:
        sols = [_solve_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            sols = list(ex.map(_solve_job, jobs))
    ms = [s.m for s in sols]
    diag = []
    for c, s in zip(cs, sols):
        row = {"c": c, "m": s.m, "converged": s.converged, "grady_fraction": s.grady_fraction,
               "reference": reference_energy(c, p, s.u.grid), "residual_pde": s.residual_pde}
        if verify:
            row.update(rescaling_check(c, p, cfg, m_c=s.m, literal=False))
        diag.append(row)
    if any(m <= 0 for m in ms):
        raise RuntimeError("non-positive m_c sample: solver failure")
    slack = 10 * noise * max(ms)
    for (c1, m1), (c2, m2) in zip(zip(cs, ms), zip(cs[1:], ms[1:])):
        if m2 > m1 + slack:
            raise RuntimeError(f"m_c increases between c={c1} and c={c2}: {m1} -> {m2}")
    tol = max(noise * max(ms), 0.0)
    return MeiCurve(tuple(cs), tuple(ms), tol), diag


def _solve_job(args) -> GroundStateSolution:
    c, lam, p, cfg, c_ref = args
    return solve_at_mass(c, lam, p, cfg, c_ref)


def rescaling_check(c: float, p: ModelParams, cfg: SolverConfig | None = None, m_c: float | None = None,
                    literal: bool = False) -> dict:
    """Compare m_c with the mass-1 problem it is supposed to equal.

    ``literal=False`` uses ``m_c = c^{-f} m_{1, c^e}``. ``literal=True`` uses
    ``m_c = c m_{1, kappa^2}`` with ``kappa = c^{-1/(2 + 4/alpha - d)}``; the
    mass-1 solve then runs on the desk-equivalent grid for that weight and is
    reported as-is, including failures.
    """
    cfg = cfg or SolverConfig()
    c_ref = desk_mass(p, cfg.grid)
    if m_c is None:
        m_c = solve_at_mass(c, 1.0, p, cfg, c_ref).m
    if literal:
        kappa = c ** (-1 / (2 + 4 / p.alpha - p.d))
        lam = kappa**2
        factor = c
    else:
        lam = c ** lambda_exponent(p)
        factor = c ** (-energy_exponent(p))
    out = {"c": c, "m_c": m_c, "lam_equiv": lam, "law": "literal" if literal else "corrected"}
    try:
        # A different discretization keeps the two solves independent.
        g = cfg.grid
        nx = 2 * int(round(0.625 * g.Nx))
        alt = SolverConfig(**{**cfg.__dict__, "grid": make_grid(g.d, 1.25 * g.Lx, nx, g.Ny)})
        s1 = solve_at_mass(1.0, lam, p, alt, c_ref)
        out.update(m1=s1.m, predicted=factor * s1.m, m1_converged=s1.converged,
                   rel_err=abs(m_c - factor * s1.m) / m_c)
    except Exception as exc:
        out.update(m1=math.nan, predicted=math.nan, m1_converged=False, rel_err=math.inf,
                   error=f"{type(exc).__name__}: {exc}")
    return out
