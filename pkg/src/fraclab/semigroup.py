"""The fractional heat semigroup exp(-t(-Laplacian)^{beta/2}) on the periodic box.

The semigroup is the Fourier multiplier exp(-t|xi|^beta).  Everything is
computed spectrally; the real-space kernel S_beta(., t) is the inverse
transform of the multiplier, shifted so that x = 0 is the centre node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from scipy import integrate, optimize, stats

from . import orlicz
from .grid import (
    GridFunction,
    GridSpec,
    abs_frequency,
    lq_norm,
)


def check_beta(beta: float) -> float:
    if not 0 < beta <= 2:
        raise ValueError(f"β must lie in (0,2], got beta={beta}")
    return float(beta)


@dataclass(frozen=True)
class EvolutionParams:
    beta: float
    t: float = 0.0

    def __post_init__(self):
        check_beta(self.beta)
        if not self.t >= 0:
            raise ValueError(f"time must be >= 0, got t={self.t}")


@dataclass(frozen=True, eq=False)
class SpectralKernel:
    params: EvolutionParams
    spec: GridSpec
    multiplier: np.ndarray


def symbol(spec: GridSpec, beta: float, half: bool = False) -> np.ndarray:
    """|xi|^beta on the FFT grid."""
    return abs_frequency(spec, half) ** check_beta(beta)


def build_kernel(spec: GridSpec, beta: float, t: float) -> SpectralKernel:
    params = EvolutionParams(beta, t)
    mult = np.exp(-t * symbol(spec, beta))
    mult.setflags(write=False)
    return SpectralKernel(params, spec, mult)


def apply_kernel(kernel: SpectralKernel, u: GridFunction) -> GridFunction:
    if u.spec != kernel.spec:
        raise ValueError("grid mismatch between kernel and field")
    if kernel.params.t == 0:
        return u
    return GridFunction(u.spec, sfft.ifftn(kernel.multiplier * sfft.fftn(u.values)).real)


def apply_semigroup(u0: GridFunction, beta: float, t: float) -> GridFunction:
    """exp(-tA) u0; t = 0 returns u0 itself."""
    check_beta(beta)
    if not t >= 0:
        raise ValueError(f"time must be >= 0, got t={t}")
    if t == 0:
        return u0
    return _propagate(u0, beta, [t])[0]


def _propagate(u0: GridFunction, beta: float, times) -> list:
    spec = u0.spec
    axes = tuple(range(spec.n))
    uh = sfft.rfftn(u0.values, axes=axes)
    sym = symbol(spec, beta, half=True)
    out = []
    for t in times:
        if t == 0:
            out.append(u0)
            continue
        vals = sfft.irfftn(np.exp(-t * sym) * uh, s=spec.shape, axes=axes)
        out.append(GridFunction(spec, vals))
    return out


def semigroup_orbit(u0: GridFunction, beta: float, times) -> list:
    """[exp(-tA) u0 for t in times], sharing a single forward transform."""
    check_beta(beta)
    return _propagate(u0, beta, list(times))


def kernel_realspace(spec: GridSpec, beta: float, t: float) -> GridFunction:
    """Discrete S_beta(., t) on the grid; its discrete mass is the zero mode, 1."""
    if not t > 0:
        raise ValueError("the kernel at t = 0 is a delta and cannot be sampled")
    k = build_kernel(spec, beta, t)
    vals = sfft.ifftn(k.multiplier).real / spec.cell_volume
    return GridFunction(spec, sfft.fftshift(vals))


def gaussian_kernel(r, t: float, n: int = 1):
    """Heat kernel (4 pi t)^{-n/2} exp(-|x|^2 / 4t), the beta = 2 case."""
    return (4 * np.pi * t) ** (-n / 2) * np.exp(-np.asarray(r) ** 2 / (4 * t))


def poisson_kernel(x, t: float):
    """One-dimensional Poisson kernel t / (pi (t^2 + x^2)), the beta = 1 case."""
    return t / (np.pi * (t**2 + np.asarray(x) ** 2))


def check_self_similarity(spec: GridSpec, beta: float, t: float) -> float:
    """max |exp(-t|xi|^beta) - exp(-|t^{1/beta} xi|^beta)| over the frequency grid."""
    check_beta(beta)
    if not t > 0:
        raise ValueError("self-similarity needs t > 0")
    xi = abs_frequency(spec)
    lhs = np.exp(-t * xi**beta)
    rhs = np.exp(-((t ** (1.0 / beta) * xi) ** beta))
    return float(np.max(np.abs(lhs - rhs)))


def _check_window(spec: GridSpec, beta: float, times):
    t_hi = max(times)
    if t_hi ** (1.0 / beta) > spec.L / 4:
        raise ValueError(
            f"t={t_hi} leaves the validity window t^(1/β) <= L/4 = {spec.L / 4}"
        )


def loglog_slope(t, y):
    """Least-squares slope of log y against log t."""
    fit = stats.linregress(np.log(t), np.log(y))
    return fit.slope, fit.stderr


@dataclass
class SmoothingResult:
    slope: float
    expected_slope: float
    times: np.ndarray
    lhs: np.ndarray
    constants: np.ndarray


def smoothing_estimate(v: GridFunction, beta: float, r: float, q: float, t_grid) -> SmoothingResult:
    """L^r -> L^q smoothing: measured norms against t^{-(n/beta)(1/r - 1/q)} ||v||_r."""
    if not 1 <= r <= q:
        raise ValueError(f"need 1 <= r <= q, got r={r}, q={q}")
    times = np.asarray(t_grid, dtype=float)
    _check_window(v.spec, beta, times)
    expo = (v.spec.n / beta) * (1.0 / r - 1.0 / q)
    lhs = np.array([lq_norm(w, q) for w in semigroup_orbit(v, beta, times)])
    constants = lhs / (times ** (-expo) * lq_norm(v, r))
    slope, _ = loglog_slope(times, lhs)
    return SmoothingResult(slope, -expo, times, lhs, constants)


def exp_norm_nonexpansive(phi: GridFunction, beta: float, p: float, t_grid,
                          slack: float = 1e-8, tol: float = 1e-12) -> int:
    """Number of times at which ||exp(-tA) phi||_{exp L^p} exceeds ||phi||_{exp L^p}."""
    if phi.is_zero():
        return 0
    ref = orlicz.exp_norm(phi, p, tol)
    evolved = semigroup_orbit(phi, beta, t_grid)
    return sum(orlicz.exp_norm(w, p, tol) > ref * (1 + slack) for w in evolved)


@dataclass
class ProfileResult:
    constant: float
    times: np.ndarray
    ratios: np.ndarray


def exp_smoothing_profile(phi: GridFunction, beta: float, p: float, q: float, t_grid) -> ProfileResult:
    """Ratios ||exp(-tA)phi||_{exp L^p} / [t^{-n/(beta q)} ln(t^{-n/beta}+1)^{-1/p} ||phi||_q]."""
    if not 1 <= q <= p:
        raise ValueError(f"need 1 <= q <= p, got q={q}, p={p}")
    if phi.is_zero():
        raise ValueError("smoothing profile undefined for the zero field")
    times = np.asarray(t_grid, dtype=float)
    _check_window(phi.spec, beta, times)
    n = phi.spec.n
    shape = times ** (-n / (beta * q)) * np.log1p(times ** (-n / beta)) ** (-1.0 / p)
    norms = np.array([orlicz.exp_norm(w, p) for w in semigroup_orbit(phi, beta, times)])
    ratios = norms / (shape * lq_norm(phi, q))
    return ProfileResult(float(ratios.max()), times, ratios)


def continuity_at_zero(phi: GridFunction, beta: float, p: float, t_seq) -> np.ndarray:
    """||exp(-tA)phi - phi||_{exp L^p} along t_seq."""
    evolved = semigroup_orbit(phi, beta, t_seq)
    return np.array([orlicz.exp_norm(w - phi, p) for w in evolved])


# --- kappa profiles ---------------------------------------------------------

SUBCRITICAL = "subcritical"
CRITICAL = "critical"


def _kappa_exponents(regime, n, beta, p, r):
    """(small-t power b, log exponent e) of the two branches; validates the regime."""
    check_beta(beta)
    crit = n * (p - 1) / p
    if regime == SUBCRITICAL:
        if not beta < crit:
            raise ValueError(f"subcritical regime needs β < n(p−1)/p = {crit:g}, got β = {beta:g}")
        if r is None or not r > n / beta:
            raise ValueError(f"subcritical regime needs r > n/β = {n / beta:g}, got r = {r}")
        return n / (beta * r), 1.0 / p
    if regime == CRITICAL:
        if not math.isclose(beta, crit, rel_tol=1e-12, abs_tol=1e-14):
            raise ValueError(f"critical regime needs β = n(p−1)/p = {crit:g}, got β = {beta:g}")
        return 0.5, 1.0 / (2 * p)
    raise ValueError(f"unknown kappa regime {regime!r}")


def kappa_profile(regime, n, beta, p, t, C=1.0, r=None):
    """min of the short-time branch C(t^{-b}+1) and the log-corrected decay branch."""
    b, e = _kappa_exponents(regime, n, beta, p, r)
    t = np.asarray(t, dtype=float)
    a = n / beta
    short = C * (t ** (-b) + 1.0)
    with np.errstate(over="ignore", divide="ignore"):
        x = t ** (-a)
        decay = C * x * np.log1p(x) ** (-e)
    return np.minimum(short, decay)


@dataclass
class KappaIntegral:
    value: float
    t_bigs: np.ndarray
    estimates: np.ndarray
    increments: np.ndarray
    converged: bool


def kappa_crossing(regime, n, beta, p, C=1.0, r=None) -> float:
    """Time where the short-time and decay branches of kappa meet."""
    b, e = _kappa_exponents(regime, n, beta, p, r)
    a = n / beta

    def gap(log_t):
        t = math.exp(log_t)
        return math.log(t ** (-b) + 1.0) + a * log_t + e * math.log(math.log1p(t ** (-a)))

    # gap -> -inf as t -> 0 and -> +inf as t -> inf
    lo, hi = -5.0, 5.0
    while gap(lo) > 0:
        lo *= 2
    while gap(hi) < 0:
        hi *= 2
    return math.exp(optimize.brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def kappa_integral(regime, n, beta, p, C=1.0, r=None, ratio=1.01,
                   t_bigs=(1e4, 1e5, 1e6), tol=1e-6) -> KappaIntegral:
    """int_0^inf kappa dt split at the branch crossing t_c.

    Head: on (0, t_c) kappa is the short-time branch C(t^{-b} + 1),
    integrated exactly.  Body: the decay branch on [t_c, T] by Simpson's
    rule in log t on a geometric grid.  Tail: beyond T the decay branch is
    C t^{-g}(1 + t^{-a} e/2 + ...), a = n/beta, g = a(1 - e), integrated
    term by term.
    """
    b, e = _kappa_exponents(regime, n, beta, p, r)
    a = n / beta
    g = a * (1.0 - e)
    if not g > 1:
        raise ValueError(f"decay branch t^-{g:g} is not integrable")
    tc = kappa_crossing(regime, n, beta, p, C, r)
    probe = tc * np.array([1e-3, 0.5, 0.99, 1.01, 2.0, 1e3])
    kap = kappa_profile(regime, n, beta, p, probe, C, r)
    short = C * (probe ** (-b) + 1.0)
    if not np.allclose(kap[:3], short[:3], rtol=1e-12) or np.allclose(kap[3:], short[3:], rtol=1e-12):
        raise ValueError("kappa does not switch branches exactly once")
    head = C * (tc ** (1 - b) / (1 - b) + tc)

    k_max = int(math.ceil(math.log(max(t_bigs) / tc) / math.log(ratio)))
    t = tc * ratio ** np.arange(k_max + 1)
    x = t ** (-a)
    decay = C * x * np.log1p(x) ** (-e)
    cum = integrate.cumulative_simpson(decay * t, dx=math.log(ratio), initial=0.0)

    estimates = []
    for T in t_bigs:
        i = int(np.searchsorted(t, T * (1 + 1e-12)) - 1)
        Ti = t[i]
        tail = C * (Ti ** (1 - g) / (g - 1) + 0.5 * e * Ti ** (1 - g - a) / (g + a - 1))
        estimates.append(head + cum[i] + tail)
    estimates = np.array(estimates)
    inc = np.abs(np.diff(estimates))
    return KappaIntegral(float(estimates[-1]), np.asarray(t_bigs, float), estimates,
                         inc, bool(np.all(inc < tol)))
