"""Orlicz gauges, Luxemburg norms and the exp L^p embedding inequalities.

Grid functions are treated as simple functions carrying mass h^n per node,
so every integral below is a plain Riemann sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .grid import GridFunction, lq_norm

EXP_CAP = 700.0

KINDS = ("expLp", "expLpReduced", "power")


@dataclass(frozen=True)
class OrliczGauge:
    """Convex gauge phi defining a Luxemburg norm.

    ``expLp``: e^{s^p} - 1, ``expLpReduced``: e^{s^p} - 1 - s^p,
    ``power``: s^p.  All kinds accept p >= 1.
    """

    kind: str
    p: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown gauge kind {self.kind!r}; expected one of {KINDS}")
        if not self.p >= 1:
            raise ValueError(f"gauge exponent must be >= 1, got p={self.p}")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        x = s**self.p
        if self.kind == "power":
            return x
        # capped arguments count as +inf: only the comparison with 1 matters
        big = x > EXP_CAP
        safe = np.where(big, 0.0, x)
        out = _expm1_minus_x(safe) if self.kind == "expLpReduced" else np.expm1(safe)
        return np.where(big, np.inf, out)


def ExpLp(p):
    return OrliczGauge("expLp", p)


def ExpLpReduced(p):
    return OrliczGauge("expLpReduced", p)


def Power(p):
    return OrliczGauge("power", p)


def _expm1_minus_x(x):
    # e^x - 1 - x without cancellation for small x
    x = np.asarray(x, dtype=float)
    small = x < 0.1
    xs = np.where(small, x, 0.0)
    series = np.zeros_like(xs)
    term = xs * xs / 2.0
    for k in range(3, 14):
        series += term
        term = term * xs / k
    return np.where(small, series, np.expm1(np.where(small, 0.0, x)) - x)


@dataclass(frozen=True)
class LuxemburgResult:
    norm: float
    iterations: int
    bracket: tuple


def gauge_integral(u: GridFunction, g: OrliczGauge, lam: float) -> float:
    """h^n sum phi(|u_j| / lam); +inf when an exponential overflows."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return float(np.sum(g(np.abs(u.values) / lam))) * u.spec.cell_volume


def luxemburg_norm(u: GridFunction, g: OrliczGauge, tol: float = 1e-10) -> LuxemburgResult:
    """inf{lam > 0 : gauge_integral(u, g, lam) <= 1} by bracketing and bisection.

    The returned ``norm`` is the upper end of the final bracket, so the
    gauge integral at ``norm`` never exceeds 1.
    """
    if not 1e-14 < tol < 1e-2:
        raise ValueError(f"tol must lie in (1e-14, 1e-2), got {tol}")
    if not np.all(np.isfinite(u.values)):
        raise ValueError("Luxemburg norm of a non-finite field")
    a = np.abs(u.values)
    top = float(a.max())
    if top == 0.0:
        return LuxemburgResult(0.0, 0, (0.0, 0.0))

    # restrict to the support; zeros contribute phi(0) = 0
    vals = a[a > 0]
    dv = u.spec.cell_volume

    def over(lam):
        return float(np.sum(g(vals / lam))) * dv > 1.0

    iters = 0
    hi = top * max(1.0, math.log(2.0) ** (-1.0 / g.p))
    while over(hi):
        hi *= 2.0
        iters += 1
    lo = hi / 2.0
    while not over(lo):
        hi = lo
        lo /= 2.0
        iters += 1
        if lo < np.finfo(float).tiny:
            return LuxemburgResult(hi, iters, (0.0, hi))
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if over(mid):
            lo = mid
        else:
            hi = mid
        iters += 1
    return LuxemburgResult(hi, iters, (lo, hi))


def exp_norm(u: GridFunction, p: float, tol: float = 1e-10) -> float:
    """Shorthand for the exp L^p Luxemburg norm."""
    return luxemburg_norm(u, ExpLp(p), tol).norm


def indicator_exp_norm(measure: float, p: float, amplitude: float = 1.0) -> float:
    """Closed form exp L^p norm of amplitude * 1_E with |E| = measure."""
    return amplitude * math.log1p(1.0 / measure) ** (-1.0 / p)


def embedding_lq_bound(u: GridFunction, p: float, q: float, tol: float = 1e-10):
    """(||u||_q, Gamma(q/p + 1)^(1/q) ||u||_{exp L^p}) for 1 <= p <= q < inf."""
    if not 1 <= p <= q < np.inf:
        raise ValueError(f"need 1 <= p <= q < inf, got p={p}, q={q}")
    lhs = lq_norm(u, q)
    rhs = math.exp(special.gammaln(q / p + 1.0) / q) * exp_norm(u, p, tol)
    return lhs, rhs


def embedding_exp_bound(u: GridFunction, p: float, q: float, tol: float = 1e-10):
    """(||u||_{exp L^p}, (ln 2)^(-1/p) (||u||_q + ||u||_inf)) for 1 <= q <= p."""
    if not 1 <= q <= p:
        raise ValueError(f"need 1 <= q <= p, got p={p}, q={q}")
    lhs = exp_norm(u, p, tol)
    rhs = math.log(2.0) ** (-1.0 / p) * (lq_norm(u, q) + lq_norm(u, np.inf))
    return lhs, rhs


def reduced_gauge_constant(p: float) -> float:
    """C(p) = 1/s* where e^{s*^p} - s*^p = 2."""
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    s_star = optimize.bisect(lambda s: math.exp(s**p) - s**p - 2.0, 0.0, 2.0,
                             xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
    return 1.0 / s_star


@dataclass(frozen=True)
class MomentBound:
    lhs: float
    rhs: float
    applicable: bool


def exp_moment_bound(u: GridFunction, p: float, lam: float, q: float,
                     tol: float = 1e-10) -> MomentBound:
    """Compare ||e^{lam |u|^p} - 1||_q with (lam q K^p)^(1/q), K the exp L^p norm.

    The bound only applies when lam q K^p <= 1; otherwise ``applicable`` is
    False and both sides are NaN.
    """
    if not lam > 0 or not q >= 1:
        raise ValueError(f"need lam > 0 and q >= 1, got lam={lam}, q={q}")
    K = exp_norm(u, p, tol)
    gate = lam * q * K**p
    if gate > 1.0:
        return MomentBound(float("nan"), float("nan"), False)
    w = np.expm1(lam * np.abs(u.values) ** p)
    lhs = lq_norm(u.with_values(w), q)
    return MomentBound(lhs, gate ** (1.0 / q), True)


def norm_equivalence_reduced(u: GridFunction, p: float, tol: float = 1e-10) -> float:
    """(||u||_p + ||u||_{phi reduced}) / ||u||_{exp L^p}."""
    if u.is_zero():
        raise ValueError("norm ratio undefined for the zero field")
    num = lq_norm(u, p) + luxemburg_norm(u, ExpLpReduced(p), tol).norm
    return num / exp_norm(u, p, tol)
