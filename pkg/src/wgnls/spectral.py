"""
Grids, fields and Fourier machinery on the truncated waveguide R^d x T.

The Euclidean factor is truncated to the periodic box [-Lx, Lx)^d; the torus
factor is [0, 2*pi) sampled uniformly. Arrays are stored with shape
``(Nx,)*d + (Ny,)`` in C order, so the torus index runs fastest.

Quadrature is the rectangle rule, which is the trapezoid rule under
periodicity and is spectrally accurate for smooth, decaying fields.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

__all__ = [
    "Grid",
    "Field",
    "SpectralWorkspace",
    "MassLeakError",
    "make_grid",
    "workspace",
    "derivative_norms",
    "lp_norm",
    "mass",
    "resample_scale",
    "write_field",
    "read_field",
    "random_smooth_field",
    "FIELD_MAGIC",
]

FIELD_MAGIC = b"WGNLS1"


class MassLeakError(RuntimeError):
    """Raised when a rescaled field loses mass through the box boundary."""


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid on [-Lx, Lx)^d x [0, 2*pi)."""

    d: int
    Lx: float
    Nx: int
    Ny: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"d must be 1 or 2, got {self.d}")
        if not (np.isfinite(self.Lx) and self.Lx > 0):
            raise ValueError(f"Lx must be positive, got {self.Lx}")
        for name in ("Nx", "Ny"):
            n = getattr(self, name)
            if int(n) != n or n < 8 or n % 2:
                raise ValueError(f"{name} must be an even integer >= 8, got {n}")
        object.__setattr__(self, "Lx", float(self.Lx))
        object.__setattr__(self, "Nx", int(self.Nx))
        object.__setattr__(self, "Ny", int(self.Ny))

    @property
    def hx(self) -> float:
        return 2.0 * self.Lx / self.Nx

    @property
    def hy(self) -> float:
        return 2.0 * np.pi / self.Ny

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.Nx,) * self.d + (self.Ny,)

    @property
    def size(self) -> int:
        return self.Nx**self.d * self.Ny

    @property
    def weight(self) -> float:
        """Quadrature weight of a single node."""
        return self.hx**self.d * self.hy

    @property
    def x(self) -> np.ndarray:
        return -self.Lx + self.hx * np.arange(self.Nx)

    @property
    def y(self) -> np.ndarray:
        return self.hy * np.arange(self.Ny)

    @property
    def xi(self) -> np.ndarray:
        """x-wavenumbers in FFT ordering."""
        return 2.0 * np.pi * np.fft.fftfreq(self.Nx, d=self.hx)

    @property
    def k(self) -> np.ndarray:
        """Torus wavenumbers (integers) in FFT ordering."""
        return np.fft.fftfreq(self.Ny, d=1.0 / self.Ny)

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays ``(x1, [x2,] y)``."""
        axes = [self.x] * self.d + [self.y]
        return tuple(np.meshgrid(*axes, indexing="ij", sparse=True))

    def radius_sq(self) -> np.ndarray:
        """|x|^2 broadcastable against field arrays."""
        return sum(c**2 for c in self.mesh()[: self.d])

    def with_Lx(self, Lx: float) -> "Grid":
        return Grid(self.d, Lx, self.Nx, self.Ny)


def make_grid(d: int, Lx: float, Nx: int, Ny: int) -> Grid:
    return Grid(d, Lx, Nx, Ny)


@dataclass(frozen=True, eq=False)
class Field:
    """Immutable complex samples of u on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.complex128, order="C")
        if v.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} samples, got {v.size}")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "Field":
        """Sample ``fn(x1, [x2,] y)`` on the grid."""
        return cls(grid, np.broadcast_to(fn(*grid.mesh()), grid.shape))

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values)

    def __mul__(self, s) -> "Field":
        return Field(self.grid, self.values * s)

    __rmul__ = __mul__

    def __add__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.grid, self.values - other.values)


class SpectralWorkspace:
    """Wavenumber tables and transform helpers for one grid.

    Holds no mutable state after construction; one per process is enough.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        d = grid.d
        xi = grid.xi
        k = grid.k
        shp = [1] * (d + 1)
        xi2 = np.zeros(grid.shape)
        self.xi_axes = []
        for ax in range(d):
            s = list(shp)
            s[ax] = grid.Nx
            xa = xi.reshape(s)
            self.xi_axes.append(xa)
            xi2 = xi2 + xa**2
        s = list(shp)
        s[d] = grid.Ny
        self.k_axis = k.reshape(s)
        self.xi2 = xi2
        self.k2 = np.broadcast_to(self.k_axis**2, grid.shape).copy()
        self.axes = tuple(range(d + 1))
        self.x_axes = tuple(range(d))

    def fft(self, a: np.ndarray) -> np.ndarray:
        return np.fft.fftn(a, axes=self.axes)

    def ifft(self, a: np.ndarray) -> np.ndarray:
        return np.fft.ifftn(a, axes=self.axes)

    def spectral_sums(self, a: np.ndarray) -> tuple[float, float, float]:
        """Parseval integrals of |u|^2, |grad_x u|^2 and |d_y u|^2."""
        g = self.grid
        p = np.abs(self.fft(a)) ** 2
        scale = g.weight / g.size
        return (
            float(p.sum() * scale),
            float((self.xi2 * p).sum() * scale),
            float((self.k2 * p).sum() * scale),
        )

    def laplacians(self, a: np.ndarray, ahat: np.ndarray | None = None):
        """Return ``(-Delta_x a, -d_y^2 a)`` computed spectrally."""
        if ahat is None:
            ahat = self.fft(a)
        return self.ifft(self.xi2 * ahat), self.ifft(self.k2 * ahat)


@lru_cache(maxsize=16)
def workspace(grid: Grid) -> SpectralWorkspace:
    return SpectralWorkspace(grid)


def _check(u: Field):
    if not isinstance(u, Field):
        raise TypeError("expected a Field")


def mass(u: Field) -> float:
    """Rectangle-rule mass  int |u|^2."""
    return float(np.sum(np.abs(u.values) ** 2) * u.grid.weight)


def derivative_norms(u: Field) -> tuple[float, float]:
    """Return ``(||grad_x u||_2^2, ||d_y u||_2^2)`` via Parseval."""
    _check(u)
    _, gx, gy = workspace(u.grid).spectral_sums(u.values)
    return gx, gy


def lp_norm(u: Field, p: float) -> float:
    if p < 1:
        raise ValueError("p must be >= 1")
    s = np.sum(np.abs(u.values) ** p) * u.grid.weight
    return float(s ** (1.0 / p))


@lru_cache(maxsize=8)
def _interp_matrix(Lx: float, Nx: int, t: float, outside: str = "periodic") -> np.ndarray:
    # Trigonometric interpolant evaluated at t*x_j; the Nyquist mode is split
    # evenly between +/- so the interpolant of real data stays real.
    hx = 2.0 * Lx / Nx
    x = -Lx + hx * np.arange(Nx)
    xi = 2.0 * np.pi * np.fft.fftfreq(Nx, d=hx)
    phase = np.outer(t * x + Lx, xi)
    E = np.exp(1j * phase)
    E[:, Nx // 2] = np.cos(phase[:, Nx // 2])
    E /= Nx
    if outside == "zero":
        E[np.abs(t * x) >= Lx, :] = 0.0
    else:
        # Past 1.25 Lx the periodic image leaves the outer quarter of the box.
        E[np.abs(t * x) >= 1.25 * Lx, :] = 0.0
    E.flags.writeable = False
    return E


def resample_scale(u: Field, t: float, leak_tol: float = 1e-6, outside: str = "periodic") -> Field:
    """Samples of ``t^{d/2} u(t x, y)`` on the same grid.

    Evaluates the band-limited (trigonometric) interpolant of ``u`` at the
    dilated nodes. Raises :class:`MassLeakError` when the relative mass change
    exceeds ``leak_tol``, which means the dilated profile no longer fits in
    the box or is no longer resolved.

    ``outside`` controls nodes with ``|t x_j| >= Lx``: ``"periodic"`` keeps the
    periodic interpolant up to ``1.25 Lx``, where it samples the decayed tails
    and stays smooth, and zeroes the rest; ``"zero"`` zeroes all of them
    (robust for wide iterates).
    """
    if outside not in ("periodic", "zero"):
        raise ValueError(f"unknown outside mode {outside!r}")
    _check(u)
    if not (np.isfinite(t) and t > 0):
        raise ValueError(f"scale factor must be positive, got {t}")
    if t == 1.0:
        return u
    g = u.grid
    E = _interp_matrix(g.Lx, g.Nx, float(t), outside)
    a = np.fft.fft(u.values, axis=0)
    a = np.tensordot(E, a, axes=(1, 0))
    if g.d == 2:
        a = np.fft.fft(a, axis=1)
        a = np.einsum("jm,imk->ijk", E, a)
    out = Field(g, a * t ** (g.d / 2.0))
    m0 = mass(u)
    if m0 > 0:
        leak = abs(mass(out) - m0) / m0
        if leak > leak_tol:
            raise MassLeakError(
                f"rescaling by t={t:.6g} changed the mass by {leak:.3e} "
                f"(> {leak_tol:.1e}); enlarge Lx or refine the grid"
            )
    return out


def random_smooth_field(grid: Grid, rng: np.random.Generator, n_bumps: int = 3, kmax: int = 3,
                        widths: tuple[float, float] = (0.5, 2.0), spread: float = 0.25) -> Field:
    """Sum of Gaussian bumps in x, each carrying a random trigonometric y-profile.

    Widths are drawn from ``widths`` and centres from ``[-spread*Lx, spread*Lx]``,
    so with the defaults the field is resolved on desk grids and negligible at
    the box edge.
    """
    xs = grid.mesh()[: grid.d]
    y = grid.mesh()[grid.d]
    out = np.zeros(grid.shape, dtype=complex)
    for _ in range(n_bumps):
        w = rng.uniform(*widths)
        r2 = sum((c - rng.uniform(-spread * grid.Lx, spread * grid.Lx)) ** 2 for c in xs)
        ky = np.arange(kmax + 1)
        coef = (rng.normal(size=kmax + 1) + 1j * rng.normal(size=kmax + 1)) / (1.0 + ky) ** 2
        prof = sum(cf * np.exp(1j * k * y) for k, cf in zip(ky, coef))
        out = out + rng.uniform(0.5, 1.5) * np.exp(-r2 / (2 * w * w)) * prof
    return Field(grid, out)


def write_field(path, u: Field, alpha: float) -> None:
    """Write the binary field format (little endian, interleaved re/im)."""
    g = u.grid
    header = FIELD_MAGIC + struct.pack("<BQQdd", g.d, g.Nx, g.Ny, g.Lx, float(alpha))
    data = np.ascontiguousarray(u.values, dtype="<c16").tobytes()
    Path(path).write_bytes(header + data)


def read_field(path) -> tuple[Field, float]:
    """Read a field file; returns ``(field, alpha)``."""
    raw = Path(path).read_bytes()
    n0 = len(FIELD_MAGIC)
    if raw[:n0] != FIELD_MAGIC:
        raise ValueError("not a WGNLS1 field file")
    hsize = struct.calcsize("<BQQdd")
    d, Nx, Ny, Lx, alpha = struct.unpack("<BQQdd", raw[n0 : n0 + hsize])
    g = Grid(d, Lx, Nx, Ny)
    body = raw[n0 + hsize :]
    if len(body) != 16 * g.size:
        raise ValueError(f"expected {16 * g.size} data bytes, found {len(body)}")
    vals = np.frombuffer(body, dtype="<c16").reshape(g.shape)
    return Field(g, vals.astype(np.complex128)), alpha
