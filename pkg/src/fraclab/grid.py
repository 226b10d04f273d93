"""Uniform periodic grids, discrete norms and spectral transforms.

The whole space R^n is replaced by the periodic box [-L, L)^n sampled with
N points per axis.  Node j sits at x_j = -L + j*h with h = 2L/N, so the
origin is node N/2 along every axis.

Transform convention
--------------------
``to_spectrum`` returns ``h**n * fftn(u)``, so the zero mode equals the
Riemann sum ``h**n * sum(u)`` (the discrete integral).  With this scaling
Parseval reads::

    h**n * sum(|u_j|**2) == sum(|U_k|**2) / (2L)**n
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on [-L, L)^n with N nodes per axis."""

    n: int
    L: float
    N: int

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got n={self.n}")
        if not self.L > 0:
            raise ValueError(f"half-width must be positive, got L={self.L}")
        if self.N < 8 or self.N & (self.N - 1):
            raise ValueError(f"points per axis must be a power of two >= 8, got N={self.N}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    def axis(self) -> np.ndarray:
        """Node coordinates along one axis."""
        return -self.L + self.h * np.arange(self.N)

    def coords(self) -> tuple:
        """Meshgrid of node coordinates (``indexing='ij'``)."""
        ax = self.axis()
        return tuple(np.meshgrid(*([ax] * self.n), indexing="ij"))

    def radius(self) -> np.ndarray:
        """|x| at every node."""
        return np.sqrt(sum(c**2 for c in self.coords()))

    def wavenumbers(self) -> np.ndarray:
        """Angular frequencies pi*k/L in FFT order along one axis."""
        return 2.0 * np.pi * sfft.fftfreq(self.N, d=self.h)

    def summary(self) -> dict:
        return {"n": self.n, "L": self.L, "N": self.N, "h": self.h}


def make_grid(n: int, L: float, N: int) -> GridSpec:
    return GridSpec(int(n), float(L), int(N))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real field sampled on a grid.

    ``values`` is stored read-only with shape ``spec.shape``.  Non-finite
    values are only accepted when ``diverged`` is set.
    """

    spec: GridSpec
    values: np.ndarray
    diverged: bool = field(default=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.size != self.spec.N**self.spec.n:
            raise ValueError(
                f"expected {self.spec.N ** self.spec.n} values, got {vals.size}"
            )
        vals = vals.reshape(self.spec.shape)
        if not self.diverged and not np.all(np.isfinite(vals)):
            raise ValueError("grid function has non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.spec, values)

    def __neg__(self):
        return self.with_values(-self.values)

    def __add__(self, other):
        return self.with_values(self.values + _vals(other))

    def __sub__(self, other):
        return self.with_values(self.values - _vals(other))

    def __mul__(self, other):
        return self.with_values(self.values * _vals(other))

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return not np.any(self.values)


def _vals(x):
    return x.values if isinstance(x, GridFunction) else x


def from_callable(spec: GridSpec, func) -> GridFunction:
    """Sample ``func(*coords)`` on the grid."""
    return GridFunction(spec, np.broadcast_to(func(*spec.coords()), spec.shape))


def zeros(spec: GridSpec) -> GridFunction:
    return GridFunction(spec, np.zeros(spec.shape))


def indicator(spec: GridSpec, measure: float = 1.0, amplitude: float = 1.0) -> GridFunction:
    """Amplitude times the indicator of a set of (discrete) measure ``measure``.

    The set is ``round(measure / h**n)`` nodes taken as a contiguous block
    (a cube when possible) starting at the origin node.  Returns the field
    and keeps the actual measure obtainable through :func:`support_measure`.
    """
    count = max(1, int(round(measure / spec.cell_volume)))
    vals = np.zeros(spec.shape)
    side = int(round(count ** (1.0 / spec.n)))
    c = spec.N // 2
    if side**spec.n == count and side <= spec.N:
        vals[tuple(slice(c, c + side) if c + side <= spec.N else slice(0, side)
                   for _ in range(spec.n))] = amplitude
    else:
        flat = vals.reshape(-1)
        if count > flat.size:
            raise ValueError("requested measure exceeds the box")
        start = np.ravel_multi_index((c,) * spec.n, spec.shape)
        idx = (start + np.arange(count)) % flat.size
        flat[idx] = amplitude
    return GridFunction(spec, vals)


def support_measure(u: GridFunction) -> float:
    return np.count_nonzero(u.values) * u.spec.cell_volume


def lq_norm(u: GridFunction, q: float) -> float:
    """Discrete L^q norm (h^n sum |u|^q)^(1/q); q = inf gives max |u|."""
    if not q >= 1:
        raise ValueError(f"q must be >= 1, got {q}")
    a = np.abs(u.values)
    top = float(a.max())
    if np.isinf(q):
        return top
    if top == 0.0:
        return 0.0
    # scale by the max so large q cannot overflow
    s = float(np.sum((a / top) ** q))
    return top * (u.spec.cell_volume * s) ** (1.0 / q)


def lp_linf(u: GridFunction, p: float) -> float:
    """||u||_p + ||u||_inf, the L^p cap L^inf norm."""
    return lq_norm(u, p) + lq_norm(u, np.inf)


@dataclass(frozen=True, eq=False)
class SpectrumFunction:
    spec: GridSpec
    coeffs: np.ndarray


def to_spectrum(u: GridFunction) -> SpectrumFunction:
    return SpectrumFunction(u.spec, u.spec.cell_volume * sfft.fftn(u.values))


def from_spectrum(s: SpectrumFunction) -> GridFunction:
    vals = sfft.ifftn(s.coeffs).real / s.spec.cell_volume
    return GridFunction(s.spec, vals)


def parseval_spectral_side(s: SpectrumFunction) -> float:
    """Spectral-side value of h^n sum |u|^2."""
    return float(np.sum(np.abs(s.coeffs) ** 2)) / (2.0 * s.spec.L) ** s.spec.n


@functools.lru_cache(maxsize=32)
def abs_frequency(spec: GridSpec, half: bool = False) -> np.ndarray:
    """|xi| on the full FFT grid, or on the ``rfftn`` half grid if ``half``."""
    k = spec.wavenumbers()
    axes = [k] * spec.n
    if half:
        axes[-1] = 2.0 * np.pi * sfft.rfftfreq(spec.N, d=spec.h)
    mesh = np.meshgrid(*axes, indexing="ij")
    out = np.sqrt(sum(m**2 for m in mesh))
    out.setflags(write=False)
    return out
