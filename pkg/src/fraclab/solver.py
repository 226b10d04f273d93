"""Mild solutions of u_t + (-Laplacian)^{beta/2} u = f(u).

Two routes are provided:

* ``picard_solve``: fixed-point iteration of the Duhamel map
  Phi(u)(t) = exp(-tA)u0 + int_0^t exp(-(t-s)A) f(u(s)) ds on a uniform time
  grid, with optional continuation over successive windows.
* ``step_evolve``: first-order exponential integrator
  u_{k+1} = exp(-dt A)(u_k + dt f(u_k)) for long horizons.

Semigroup factors are applied exactly in Fourier space; the only
discretization in time is the quadrature of the Duhamel integral.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .grid import GridFunction, lp_linf, lq_norm
from .orlicz import EXP_CAP
from .semigroup import EvolutionParams, check_beta, symbol

log = logging.getLogger(__name__)

CONVERGED = "Converged"
ITERATION_CAP = "IterationCap"
DIVERGED = "Diverged"


class DivergenceError(FloatingPointError):
    """Raised when e^{lam |u|^p} would overflow, i.e. the solution is blowing up."""


@dataclass(frozen=True)
class Nonlinearity:
    """f(u) = sign |u|^{m-1} u exp(lam |u|^p)."""

    m: float = 1.0
    p: float = 2.0
    lam: float = 1.0
    sign: int = 1

    def __post_init__(self):
        if not self.m >= 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if not self.p > 1:
            raise ValueError(f"p must be > 1, got {self.p}")
        if not self.lam > 0:
            raise ValueError(f"λ must be > 0, got {self.lam}")
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")

    def _expo(self, a):
        with np.errstate(over="ignore"):
            e = self.lam * a**self.p
        if np.any(e > EXP_CAP):
            raise DivergenceError(f"exp argument {float(np.max(e)):.3g} exceeds {EXP_CAP}")
        return e

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        a = np.abs(u)
        return self.sign * a ** (self.m - 1) * u * np.exp(self._expo(a))

    def derivative(self, u):
        a = np.abs(np.asarray(u, dtype=float))
        return self.sign * np.exp(self._expo(a)) * (
            self.m * a ** (self.m - 1) + self.lam * self.p * a ** (self.m - 1 + self.p)
        )

    def weight(self, u):
        """|u|^{m-1} exp(lam |u|^p), the growth factor in the Lipschitz condition."""
        a = np.abs(np.asarray(u, dtype=float))
        return a ** (self.m - 1) * np.exp(self._expo(a))

    def as_dict(self):
        return {"m": self.m, "p": self.p, "lambda": self.lam, "sign": self.sign}


def eval_f(f: Nonlinearity, u: GridFunction) -> GridFunction:
    return GridFunction(u.spec, f(u.values))


def lipschitz_constant(f: Nonlinearity, A: float, points: int = 801) -> float:
    """Smallest C with |f(u)-f(v)| <= C|u-v|(w(u)+w(v)) over a dense scan of [-A, A]^2.

    w is ``f.weight``.  The diagonal uses the derivative limit
    |f'(u)| / (2 w(u)).
    """
    s = np.linspace(-A, A, points)
    if 0.0 not in s:
        s = np.sort(np.append(s, 0.0))
    fu, w = f(s), f.weight(s)
    num = np.abs(fu[:, None] - fu[None, :])
    den = np.abs(s[:, None] - s[None, :]) * (w[:, None] + w[None, :])
    diag_num = np.abs(f.derivative(s))
    diag_den = 2 * w
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, num / den, 0.0)
        diag = np.where(diag_den > 0, diag_num / diag_den, f.m / 2.0)
    return float(max(ratio.max(), diag.max()))


def lipschitz_witness(f: Nonlinearity, u: GridFunction, v: GridFunction, C=None):
    """Nodewise (|f(u)-f(v)|, C|u-v|(w(u)+w(v))) with C scanned when not given."""
    a, b = u.values, v.values
    if C is None:
        A = float(max(np.abs(a).max(), np.abs(b).max(), 1e-12))
        C = lipschitz_constant(f, A)
    lhs = np.abs(f(a) - f(b))
    rhs = C * np.abs(a - b) * (f.weight(a) + f.weight(b))
    return lhs, rhs


def local_time_estimate(K: float, f: Nonlinearity, C: float) -> float:
    """T with 4 T C exp(lam (2K)^p) = 1; zero when the exponential overflows."""
    if not K >= 0 or not C > 0:
        raise ValueError(f"need K >= 0 and C > 0, got K={K}, C={C}")
    e = f.lam * (2 * K) ** f.p
    if e > EXP_CAP:
        return 0.0
    return 1.0 / (4 * C * math.exp(e))


@dataclass
class SolveConfig:
    T: float
    picard_tol: float = 1e-8
    max_iter: int = 100
    quad_points: int = 1000
    blow_threshold: float = 1e6
    min_steps: int = 8

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"horizon must be positive, got T={self.T}")
        if not self.picard_tol > 0 or not self.blow_threshold > 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1 or self.quad_points < 1:
            raise ValueError("max_iter and quad_points must be >= 1")

    def steps_for(self, T: float) -> int:
        return max(self.min_steps, int(math.ceil(T * self.quad_points - 1e-9)))


@dataclass
class SolveStatus:
    outcome: str
    iterations: int = 0
    contraction_ratios: list = field(default_factory=list)
    t_max_estimate: float = math.inf
    residual: float = math.nan
    stiffness: float = 0.0
    windows: int = 0
    reason: str = ""

    def summary(self) -> dict:
        return {
            "outcome": self.outcome,
            "iterations": self.iterations,
            "contraction_ratios": [float(r) for r in self.contraction_ratios],
            "t_max_estimate": None if math.isinf(self.t_max_estimate) else self.t_max_estimate,
            "residual": None if math.isnan(self.residual) else self.residual,
            "stiffness": self.stiffness,
            "windows": self.windows,
            "reason": self.reason,
        }


@dataclass
class Trajectory:
    times: np.ndarray
    states: list
    params: EvolutionParams
    f: Nonlinearity

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")
        if len(self.times) and (self.times[0] != 0 or np.any(np.diff(self.times) <= 0)):
            raise ValueError("times must start at 0 and increase")

    @property
    def beta(self):
        return self.params.beta

    def final(self) -> GridFunction:
        return self.states[-1]


# --- spectral helpers --------------------------------------------------------

class _Spectral:
    """rfft-based transforms and semigroup factors for one grid and beta."""

    def __init__(self, spec, beta):
        self.spec = spec
        self.axes = tuple(range(spec.n))
        self.sym = symbol(spec, beta, half=True)

    def fwd(self, vals):
        return sfft.rfftn(vals, axes=self.axes)

    def inv(self, coeffs):
        return sfft.irfftn(coeffs, s=self.spec.shape, axes=self.axes)

    def decay(self, t):
        return np.exp(-t * self.sym)


def duhamel_integral(times, forcing, beta: float, t_index: int) -> GridFunction:
    """int_0^{t_i} exp(-(t_i - s)A) g(s) ds by the composite midpoint rule.

    On each interval [t_j, t_{j+1}] the semigroup factor is evaluated at the
    midpoint and g is replaced by the mean of its end values.
    """
    check_beta(beta)
    times = np.asarray(times, dtype=float)
    spec = forcing[0].spec
    sp = _Spectral(spec, beta)
    ti = times[t_index]
    acc = np.zeros(sp.sym.shape, dtype=complex)
    for j in range(t_index):
        dt = times[j + 1] - times[j]
        mid = 0.5 * (times[j] + times[j + 1])
        g = 0.5 * (forcing[j].values + forcing[j + 1].values)
        acc += dt * sp.decay(ti - mid) * sp.fwd(g)
    return GridFunction(spec, sp.inv(acc))


def duhamel_apply(traj: Trajectory, u0: GridFunction, t_index: int) -> GridFunction:
    """Phi(u)(t_i) = exp(-t_i A) u0 + Duhamel integral of f(u) along ``traj``."""
    sp = _Spectral(u0.spec, traj.beta)
    lin = sp.inv(sp.decay(traj.times[t_index]) * sp.fwd(u0.values))
    if t_index == 0:
        return u0
    forcing = [eval_f(traj.f, s) for s in traj.states[: t_index + 1]]
    return GridFunction(u0.spec, lin) + duhamel_integral(traj.times, forcing, traj.beta, t_index)


class _DuhamelMap:
    """Phi on a uniform grid t_i = i dt, evaluated for all i with a recursion.

    D_{i+1} = E D_i + dt E_half (g_i + g_{i+1}) / 2 in Fourier space, with
    E = exp(-dt |xi|^beta) and E_half = exp(-dt |xi|^beta / 2).
    """

    def __init__(self, u0, f, beta, T, steps):
        self.sp = _Spectral(u0.spec, beta)
        self.f = f
        self.dt = T / steps
        self.times = self.dt * np.arange(steps + 1)
        self.E = self.sp.decay(self.dt)
        self.E_half = self.sp.decay(0.5 * self.dt)
        u0h = self.sp.fwd(u0.values)
        self.linear = [u0.values] + [self.sp.inv(self.sp.decay(t) * u0h) for t in self.times[1:]]

    def __call__(self, states):
        gh = [self.sp.fwd(self.f(u)) for u in states]
        out = [self.linear[0]]
        D = np.zeros_like(gh[0])
        for i in range(len(states) - 1):
            D = self.E * D + (0.5 * self.dt) * self.E_half * (gh[i] + gh[i + 1])
            out.append(self.linear[i + 1] + self.sp.inv(D))
        return out


def _sup_diff(a, b):
    return max(float(np.max(np.abs(x - y))) for x, y in zip(a, b))


def picard_solve(u0: GridFunction, f: Nonlinearity, beta: float, cfg: SolveConfig,
                 initial: str = "linear"):
    """Picard iteration u^{k+1} = Phi(u^k) on [0, cfg.T].

    ``initial`` selects the starting iterate: ``"linear"`` uses
    u^0(t) = exp(-tA)u0, ``"constant"`` holds u0 fixed in time.
    Returns ``(Trajectory, SolveStatus)``.
    """
    params = EvolutionParams(check_beta(beta))
    steps = cfg.steps_for(cfg.T)
    Phi = _DuhamelMap(u0, f, beta, cfg.T, steps)

    def wrap(states, status):
        gfs = [u0] + [GridFunction(u0.spec, s) for s in states[1:]]
        return Trajectory(Phi.times.copy(), gfs, params, f), status

    if initial == "linear":
        cur = list(Phi.linear)
    elif initial == "constant":
        cur = [u0.values] * (steps + 1)
    else:
        raise ValueError(f"unknown initial iterate {initial!r}")

    ratios = []
    prev_d = None
    for k in range(1, cfg.max_iter + 1):
        try:
            new = Phi(cur)
        except DivergenceError:
            return wrap(cur, SolveStatus(DIVERGED, k, ratios, reason="overflow"))
        top = max(float(np.max(np.abs(s))) for s in new)
        if not math.isfinite(top) or top > cfg.blow_threshold:
            return wrap(cur, SolveStatus(DIVERGED, k, ratios, reason="threshold"))
        d = _sup_diff(new, cur)
        if prev_d is not None and prev_d > 0:
            ratios.append(d / prev_d)
        prev_d = d
        cur = new
        if d < cfg.picard_tol:
            try:
                residual = _sup_diff(cur, Phi(cur))
            except DivergenceError:
                residual = math.inf
            return wrap(cur, SolveStatus(CONVERGED, k, ratios, residual=residual))
    return wrap(cur, SolveStatus(ITERATION_CAP, cfg.max_iter, ratios))


def picard_continue(u0: GridFunction, f: Nonlinearity, beta: float, cfg: SolveConfig,
                    C: float | None = None, min_window: float = 0.0, max_windows: int = 10_000):
    """Picard solve over [0, cfg.T] in successive windows.

    Each window restarts from the last state, with length
    max(local_time_estimate(||u||_p + ||u||_inf), min_window) clipped to the
    remaining horizon.  C defaults to a scanned Lipschitz constant on
    [-2K, 2K].  Divergence inside a window stops the run and records the
    window start as ``t_max_estimate``.
    """
    params = EvolutionParams(check_beta(beta))
    t0 = 0.0
    times, states = [0.0], [u0]
    total_iter, ratios, windows = 0, [], 0
    u = u0
    residual = 0.0
    while t0 < cfg.T * (1 - 1e-12):
        if windows >= max_windows:
            status = SolveStatus(ITERATION_CAP, total_iter, ratios, windows=windows)
            return Trajectory(times, states, params, f), status
        K = lp_linf(u, f.p)
        try:
            Cw = C if C is not None else lipschitz_constant(f, max(2 * K, 1e-6))
            Tw = local_time_estimate(K, f, Cw)
        except DivergenceError:
            Tw = 0.0
        Tw = min(max(Tw, min_window), cfg.T - t0)
        if Tw <= 0:
            status = SolveStatus(DIVERGED, total_iter, ratios, t_max_estimate=t0,
                                 windows=windows, reason="overflow")
            return Trajectory(times, states, params, f), status
        sub = SolveConfig(Tw, cfg.picard_tol, cfg.max_iter, cfg.quad_points,
                          cfg.blow_threshold, cfg.min_steps)
        traj, st = picard_solve(u, f, beta, sub)
        windows += 1
        total_iter += st.iterations
        ratios.extend(st.contraction_ratios)
        if st.outcome != CONVERGED:
            t_max = t0 if st.outcome == DIVERGED else math.inf
            status = SolveStatus(st.outcome, total_iter, ratios, t_max_estimate=t_max,
                                 windows=windows, reason=st.reason)
            return Trajectory(times, states, params, f), status
        residual = max(residual, st.residual)
        times.extend(t0 + traj.times[1:])
        states.extend(traj.states[1:])
        u = traj.final()
        t0 += Tw
        if lp_linf(u, f.p) > cfg.blow_threshold:
            status = SolveStatus(DIVERGED, total_iter, ratios, t_max_estimate=t0,
                                 residual=residual, windows=windows, reason="threshold")
            return Trajectory(times, states, params, f), status
    status = SolveStatus(CONVERGED, total_iter, ratios, residual=residual, windows=windows)
    return Trajectory(times, states, params, f), status


# --- exponential integrator ------------------------------------------------

def iter_etd(u0: GridFunction, f: Nonlinearity, beta: float, dt: float, steps: int):
    """Yield (k, t_k, values, stiffness) for the first-order exponential integrator.

    ``stiffness`` is dt * max |f'(u_k)|.  Raises DivergenceError if f
    overflows.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    sp = _Spectral(u0.spec, beta)
    E = sp.decay(dt)
    u = u0.values
    yield 0, 0.0, u, dt * float(np.max(np.abs(f.derivative(u))))
    for k in range(1, steps + 1):
        u = sp.inv(E * sp.fwd(u + dt * f(u)))
        yield k, k * dt, u, dt * float(np.max(np.abs(f.derivative(u))))


def step_evolve(u0: GridFunction, f: Nonlinearity, beta: float, dt: float, steps: int,
                save_every: int = 1, blow_threshold: float = math.inf, callback=None):
    """Exponential-integrator run; states are kept every ``save_every`` steps.

    ``callback(t, GridFunction)`` is invoked at every saved step.  The run
    stops with outcome Diverged when ||u||_p + ||u||_inf crosses
    ``blow_threshold`` or f overflows; the last finite state is kept.
    """
    params = EvolutionParams(check_beta(beta))
    times, states = [], []
    stiff = 0.0
    warned = False
    status = SolveStatus(CONVERGED)
    last = (0.0, u0)
    it = iter_etd(u0, f, beta, dt, steps)
    while True:
        try:
            k, t, vals, s = next(it)
        except StopIteration:
            break
        except DivergenceError:
            status = SolveStatus(DIVERGED, t_max_estimate=last[0], reason="overflow")
            break
        stiff = max(stiff, s)
        if s > 0.5 and not warned:
            log.warning("dt * max|f'(u)| = %.3g exceeds 0.5 at t = %g", s, t)
            warned = True
        if not np.all(np.isfinite(vals)):
            status = SolveStatus(DIVERGED, t_max_estimate=last[0], reason="overflow")
            break
        gf = GridFunction(u0.spec, vals)
        last = (t, gf)
        crossed = lp_linf(gf, f.p) > blow_threshold
        if k % save_every == 0 or k == steps or crossed:
            times.append(t)
            states.append(gf)
            if callback is not None:
                callback(t, gf)
        if crossed:
            status = SolveStatus(DIVERGED, t_max_estimate=t, reason="threshold")
            break
    if times[-1] != last[0]:
        times.append(last[0])
        states.append(last[1])
        if callback is not None:
            callback(*last)
    status.iterations = len(times) - 1
    status.stiffness = stiff
    return Trajectory(times, states, params, f), status


def blowup_monitor(traj: Trajectory, p: float, threshold: float = math.inf) -> SolveStatus:
    """Flag the first stored time where ||u||_p + ||u||_inf exceeds ``threshold``."""
    for t, u in zip(traj.times, traj.states):
        if lp_linf(u, p) > threshold:
            return SolveStatus(DIVERGED, t_max_estimate=float(t), reason="threshold")
    return SolveStatus(CONVERGED)


def linf_series(traj: Trajectory, q: float = math.inf):
    return np.array([lq_norm(s, q) for s in traj.states])
