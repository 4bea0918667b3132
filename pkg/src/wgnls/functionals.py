"""
Scalar functionals of the focusing NLS on R^d x T and the scalings acting on them.

Notation used throughout the package::

    gradx = ||grad_x u||_2^2      grady = ||d_y u||_2^2
    pot   = ||u||_{alpha+2}^{alpha+2}
    M = ||u||_2^2
    H = (gradx + grady)/2 - pot/(alpha+2)
    K = gradx - alpha*d/(2(alpha+2)) * pot          (semivirial)
    I = grady/2 + (alpha*d - 4)/(4(alpha+2)) * pot  (= H - K/2)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from fractions import Fraction

import numpy as np

from .spectral import Field, derivative_norms, mass, resample_scale

__all__ = [
    "ModelParams",
    "FunctionalReport",
    "ExponentTable",
    "MeiCurve",
    "DegenerateFieldError",
    "evaluate",
    "energy_lambda",
    "scale_ut",
    "scale_Tlambda",
    "tstar",
    "tstar_from_norms",
    "fibering_energy",
    "gn_ratio",
    "exponent_table",
    "admissible_pairs",
    "mei",
    "mei_band",
    "mei_grid",
]


class DegenerateFieldError(ValueError):
    """A functional is undefined on the given field (zero mass, no gradient...)."""


@dataclass(frozen=True)
class ModelParams:
    """Dimension of the Euclidean factor and nonlinearity exponent.

    ``alpha`` must lie in the intercritical window (4/d, 4/(d-1)); for d=1 the
    upper end is infinite.
    """

    d: int
    alpha: float

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ValueError("; ".join(problems))
        object.__setattr__(self, "alpha", float(self.alpha))

    def violations(self) -> list[str]:
        d, a = self.d, self.alpha
        if int(d) != d or d < 1:
            return [f"functionals: ModelParams.d must be a positive integer, got {d}"]
        lo = 4.0 / d
        hi = math.inf if d == 1 else 4.0 / (d - 1)
        if not (lo < a < hi):
            return [
                f"functionals: ModelParams.alpha={a} outside the intercritical window "
                f"({lo:g}, {hi:g}) for d={d}"
            ]
        return []

    @property
    def virial_coef(self) -> float:
        """alpha*d / (2(alpha+2)), the weight of pot in K."""
        return self.alpha * self.d / (2.0 * (self.alpha + 2.0))

    @property
    def fiber_power(self) -> float:
        """alpha*d/2, the exponent of t in pot(u^t)."""
        return self.alpha * self.d / 2.0


@dataclass(frozen=True)
class FunctionalReport:
    M: float
    H: float
    K: float
    I: float
    gradx_sq: float
    grady_sq: float
    pot: float

    def as_dict(self) -> dict:
        return asdict(self)


def _norms(u: Field, alpha: float) -> tuple[float, float, float, float]:
    gx, gy = derivative_norms(u)
    pot = float(np.sum(np.abs(u.values) ** (alpha + 2)) * u.grid.weight)
    return mass(u), gx, gy, pot


def _check_dim(u: Field, p: ModelParams):
    if u.grid.d != p.d:
        raise ValueError(f"field lives on d={u.grid.d}, params have d={p.d}")


def evaluate(u: Field, p: ModelParams) -> FunctionalReport:
    """Mass, energy, semivirial and action of ``u``."""
    _check_dim(u, p)
    a = p.alpha
    M, gx, gy, pot = _norms(u, a)
    H = 0.5 * (gx + gy) - pot / (a + 2.0)
    K = gx - p.virial_coef * pot
    # I from its own formula; agreement with H - K/2 is a consistency check.
    I = 0.5 * gy + (a * p.d - 4.0) / (4.0 * (a + 2.0)) * pot
    return FunctionalReport(M=M, H=H, K=K, I=I, gradx_sq=gx, grady_sq=gy, pot=pot)


def energy_lambda(u: Field, lam: float, p: ModelParams) -> tuple[float, float]:
    """Return ``(H_lambda(u), I_lambda(u))`` with torus weight ``lam``."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    _check_dim(u, p)
    a = p.alpha
    _, gx, gy, pot = _norms(u, a)
    H = 0.5 * lam * gy + 0.5 * gx - pot / (a + 2.0)
    I = 0.5 * lam * gy + (a * p.d - 4.0) / (4.0 * (a + 2.0)) * pot
    return H, I


def scale_ut(u: Field, t: float, leak_tol: float = 1e-6) -> Field:
    """The mass-preserving x-dilation ``u^t = t^{d/2} u(t x, y)``."""
    return resample_scale(u, t, leak_tol=leak_tol)


def scale_Tlambda(u: Field, lam: float, p: ModelParams, leak_tol: float = 1e-6) -> Field:
    """``T_lam u = lam^{2/alpha} u(lam x, y)``, which keeps K = 0 invariant."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    _check_dim(u, p)
    v = resample_scale(u, lam, leak_tol=leak_tol)
    return v * lam ** (2.0 / p.alpha - p.d / 2.0)


def tstar_from_norms(gradx_sq: float, pot: float, p: ModelParams) -> float:
    """Unique t > 0 with K(u^t) = 0, from the two norms that K depends on."""
    if not (gradx_sq > 0 and pot > 0):
        raise DegenerateFieldError("t* needs gradx_sq > 0 and pot > 0")
    ad = p.alpha * p.d
    return (2.0 * (p.alpha + 2.0) * gradx_sq / (ad * pot)) ** (2.0 / (ad - 4.0))


def tstar(u: Field, p: ModelParams) -> float:
    _check_dim(u, p)
    _, gx, _, pot = _norms(u, p.alpha)
    return tstar_from_norms(gx, pot, p)


def fibering_energy(gradx_sq: float, grady_sq: float, pot: float, p: ModelParams, lam: float = 1.0):
    """``max_t H_lam(u^t)`` and the maximiser ``t*``.

    Along the fiber, ``H_lam(u^t) = lam*grady/2 + t^2*gradx/2 - t^{ad/2} pot/(alpha+2)``.
    """
    ts = tstar_from_norms(gradx_sq, pot, p)
    E = 0.5 * lam * grady_sq + 0.5 * ts**2 * gradx_sq - ts**p.fiber_power * pot / (p.alpha + 2.0)
    return E, ts


def gn_ratio(u: Field, p: ModelParams) -> float:
    """Ratio of pot to the right-hand side of the x-scale-invariant GN bound."""
    _check_dim(u, p)
    a, d = p.alpha, p.d
    M, gx, gy, pot = _norms(u, a)
    if M == 0:
        raise DegenerateFieldError("gn_ratio of the zero field")
    if gx == 0:
        raise DegenerateFieldError("gn_ratio needs a non-zero x-gradient")
    l2 = math.sqrt(M)
    rhs = (
        math.sqrt(gx) ** (a * d / 2.0)
        * l2 ** ((4.0 - a * (d - 1)) / 2.0)
        * (l2 ** (a / 2.0) + math.sqrt(gy) ** (a / 2.0))
    )
    return pot / rhs


# ---------------------------------------------------------------------------
# Exponent bookkeeping


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(str(x))


def _conj(p: Fraction) -> Fraction:
    return p / (p - 1)


@dataclass(frozen=True)
class ExponentTable:
    d: int
    alpha: Fraction
    s_alpha: Fraction
    theta: Fraction
    ba: Fraction
    bb: Fraction
    br: Fraction
    pair_tilde: tuple[Fraction, Fraction]
    pair_hat: tuple[Fraction, Fraction]

    def identities(self) -> dict[str, bool]:
        """Exact checks of every relation the table is built to satisfy."""
        a, d = self.alpha, self.d
        half = Fraction(d, 2)

        def admissible(q, r):
            return 2 / q + d / r == half and q >= 2 and r >= 2

        qt, rt = self.pair_tilde
        qh, rh = self.pair_hat
        return {
            "br_conjugate": (a + 1) * _conj(self.br) == self.br,
            "bb_conjugate": (a + 1) * _conj(self.bb) == self.ba,
            "tilde_admissible": admissible(qt, rt),
            "hat_admissible": admissible(qh, rh),
            "time_holder": 1 / _conj(qt) == a / self.ba + 1 / qh,
            "space_holder": 1 / _conj(rt) == a / self.br + 1 / rh,
            "s_alpha_range": 0 < self.s_alpha < Fraction(1, 2),
            "theta_range": 0 < self.theta < 1,
        }

    def as_json(self) -> dict:
        def f(x):
            return {"value": float(x), "exact": str(x)}

        return {
            "d": self.d,
            "alpha": f(self.alpha),
            "s_alpha": f(self.s_alpha),
            "theta": f(self.theta),
            "ba": f(self.ba),
            "bb": f(self.bb),
            "br": f(self.br),
            "pair_tilde": [f(x) for x in self.pair_tilde],
            "pair_hat": [f(x) for x in self.pair_hat],
            "identities": self.identities(),
        }


def admissible_pairs(d: int, alpha) -> tuple[tuple[Fraction, Fraction], tuple[Fraction, Fraction]]:
    """Space exponents by the three-case rule, time exponents from admissibility.

    No window check here; :func:`exponent_table` performs it.
    """
    a = _frac(alpha)
    ba = 2 * a * (a + 2) / (4 - (d - 2) * a)
    if d in (1, 2):
        rt = a + 2
        rh = a + 2
    elif a <= Fraction(2, d - 1):
        rt = 2 * (2 + a) / (2 - a)
        rh = Fraction(2)
    else:
        rt = Fraction(2 * d, d - 2)
        rh = 2 * d * (a + 2) / (4 * d - (a + 2) * (d - 2))
    half = Fraction(d, 2)
    qt = 2 / (half - d / rt)
    qh = 1 / (1 - 1 / qt - a / ba)
    return (qt, rt), (qh, rh)


def exponent_table(p: ModelParams | tuple) -> ExponentTable:
    """Exact exponents for (d, alpha); accepts ModelParams or a ``(d, alpha)`` pair.

    Float alphas are read through their shortest decimal repr, so 3.1 becomes
    31/10; pass a Fraction to be explicit.
    """
    raw_alpha = p[1] if not isinstance(p, ModelParams) else p.alpha
    if not isinstance(p, ModelParams):
        p = ModelParams(p[0], float(raw_alpha))
    d = p.d
    a = _frac(raw_alpha if isinstance(raw_alpha, (Fraction, int)) else repr(float(raw_alpha)))
    s_alpha = Fraction(d, 2) - 2 / a
    theta = 2 * (4 - (d - 2) * a) / (a**2 * d)
    ba = 2 * a * (a + 2) / (4 - (d - 2) * a)
    bb = 2 * a * (a + 2) / (d * a**2 + (d - 2) * a - 4)
    br = a + 2
    tilde, hat = admissible_pairs(d, a)
    return ExponentTable(d, a, s_alpha, theta, ba, bb, br, tilde, hat)


# ---------------------------------------------------------------------------
# Mass-energy indicator


@dataclass(frozen=True)
class MeiCurve:
    """Piecewise-linear samples of the ground-state curve c -> m_c.

    ``tol`` is the absolute uncertainty of each m value; it feeds
    :func:`mei_band`.
    """

    c: tuple[float, ...]
    m: tuple[float, ...]
    tol: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        m = np.asarray(self.m, dtype=float)
        if c.ndim != 1 or c.shape != m.shape or c.size < 2:
            raise ValueError("MeiCurve needs at least two (c, m) knots")
        if np.any(np.diff(c) <= 0):
            raise ValueError("MeiCurve knots must be strictly increasing in c")
        if np.any(m <= 0):
            raise ValueError("MeiCurve values must be positive")
        object.__setattr__(self, "c", tuple(float(v) for v in c))
        object.__setattr__(self, "m", tuple(float(v) for v in m))

    def __call__(self, c: float) -> float:
        if not (self.c[0] <= c <= self.c[-1]):
            raise ValueError(f"c={c} outside the curve range [{self.c[0]}, {self.c[-1]}]")
        return float(np.interp(c, self.c, self.m))

    def shifted(self, dm: float) -> "MeiCurve":
        return MeiCurve(self.c, tuple(v + dm for v in self.m), self.tol)


def _dist_to_segment(P, A, B) -> float:
    AB = B - A
    L2 = float(AB @ AB)
    s = 0.0 if L2 == 0 else min(1.0, max(0.0, float((P - A) @ AB) / L2))
    return float(np.hypot(*(P - A - s * AB)))


def _dist_to_upper_set(c: float, h: float, curve: MeiCurve) -> float:
    """Distance from (c, h) to {c' >= c_0, h' >= m(c')} with m extended flat past the last knot."""
    P = np.array([c, h])
    knots = np.column_stack([curve.c, curve.m])
    best = math.inf
    for A, B in zip(knots[:-1], knots[1:]):
        best = min(best, _dist_to_segment(P, A, B))
    c0, m0 = knots[0]
    # vertical ray above the first knot
    best = min(best, math.hypot(c - c0, max(0.0, m0 - h)) if h <= m0 else abs(c - c0))
    # flat continuation to the right of the last knot
    c1, m1 = knots[-1]
    best = min(best, math.hypot(max(0.0, c1 - c), m1 - h) if c <= c1 else abs(m1 - h))
    return best


def mei(c: float, h: float, curve: MeiCurve) -> float:
    """Mass-energy indicator D(c, h); ``math.inf`` off the sub-threshold region."""
    if c > 0:
        if h >= curve(c):
            return math.inf
    elif c < curve.c[0]:
        raise ValueError(f"c={c} outside the curve range [{curve.c[0]}, {curve.c[-1]}]")
    dist = _dist_to_upper_set(c, h, curve)
    return h + (h + c) / dist


def mei_band(c: float, h: float, curve: MeiCurve) -> tuple[float, float]:
    """D evaluated with the curve shifted by -tol and +tol."""
    return mei(c, h, curve.shifted(-curve.tol)), mei(c, h, curve.shifted(curve.tol))


def _mei_row(args) -> list[float]:
    c, hs, curve = args
    return [mei(c, h, curve) for h in hs]


def mei_grid(cs, hs, curve: MeiCurve, workers: int = 1) -> np.ndarray:
    """D on the product grid ``cs x hs`` (rows indexed by c).

    Rows are independent and merged in input order, so the array does not
    depend on ``workers``.
    """
    jobs = [(float(c), [float(h) for h in hs], curve) for c in cs]
    if workers <= 1:
        rows = [_mei_row(j) for j in jobs]
    else:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_mei_row, jobs))
    return np.array(rows, dtype=float)
