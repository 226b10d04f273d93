"""Global-theory checks: regimes, decay rates, smallness budgets and parameter selection.

The global theory distinguishes three regimes according to the sign of
beta - n(p-1)/p.  In each regime small data give solutions with
||u(t)||_q <= C t^{-sigma}, sigma = 1/(m-1) - n/(beta q), for q in a
regime-dependent interval.  The series argument behind it requires
interpolation weights theta_k and auxiliary exponents rho_k, a, r chosen
per term k; :func:`select_parameters` reproduces that arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from . import orlicz
from .grid import from_callable, lq_norm, make_grid
from .semigroup import check_beta
from .solver import Nonlinearity, step_evolve

BELOW = "Below"
EQUAL = "Equal"
ABOVE = "Above"

BOUND = "Bound"
CONTRACTION = "Contraction"


class RegimeError(ValueError):
    """Hypothesis violation; ``reasons`` lists every failed inequality."""

    def __init__(self, reasons):
        self.reasons = list(reasons)
        super().__init__("; ".join(self.reasons))


def _pos(x):
    return max(x, 0.0)


@dataclass(frozen=True)
class RegimeResult:
    regime: str
    q_interval: tuple
    reasons: list = field(default_factory=list)

    def contains(self, q: float) -> bool:
        lo, hi = self.q_interval
        return lo < q < hi

    def as_dict(self):
        lo, hi = self.q_interval
        return {"regime": self.regime,
                "q_interval": [lo, None if math.isinf(hi) else hi],
                "reasons": self.reasons}


def regime_classify(n: int, beta: float, p: float, m: float) -> RegimeResult:
    """Classify beta against n(p-1)/p and return the admissible open q interval.

    Raises :class:`RegimeError` naming each failed hypothesis.  The
    ``Equal`` case is decided with a relative tolerance of 1e-12, so exact
    rational inputs (n=2, p=2, beta=1) land on it.
    """
    check_beta(beta)
    if n < 1:
        raise RegimeError([f"dimension n = {n} must be >= 1"])
    crit = n * (p - 1) / p
    if math.isclose(beta, crit, rel_tol=1e-12, abs_tol=1e-15):
        regime = EQUAL
    elif beta < crit:
        regime = BELOW
    else:
        regime = ABOVE

    fails = []
    if not p > 1:
        fails.append(f"p > 1 fails: p = {p:g}")
    if not m >= p:
        fails.append(f"m >= p fails: m = {m:g} < p = {p:g}")
    hyp = n * (m - 1) / beta
    if not hyp >= p * (1 - 1e-12):
        fails.append(f"n(m-1)/β >= p fails: n(m-1)/β = {hyp:g} < p = {p:g}")
    deficit = _pos(2 - m)
    upper = math.inf if deficit == 0 else n * (m - 1) / (beta * deficit)
    if regime == ABOVE:
        if not m > p:
            fails.append(f"regime Above needs m > p, got m = p = {p:g}")
        gap = n * (p - 1) / (p * beta)
        if not deficit < gap:
            fails.append(f"regime Above needs (2-m)_+ < n(p-1)/(pβ): {deficit:g} >= {gap:g}")
        lower = (m - 1) * p / (p - 1)
    else:
        lower = hyp
    if fails:
        raise RegimeError(fails)
    reasons = [f"β = {beta:g} vs n(p-1)/p = {crit:g}: {regime}"]
    if regime == EQUAL:
        reasons.append("Equal uses the Below interval")
    if not lower < upper:
        raise RegimeError([f"empty q interval ({lower:g}, {upper:g})"])
    return RegimeResult(regime, (lower, upper), reasons)


@dataclass(frozen=True)
class DecayTarget:
    n: int
    beta: float
    p: float
    m: float
    q: float

    def __post_init__(self):
        res = regime_classify(self.n, self.beta, self.p, self.m)
        if not res.contains(self.q):
            lo, hi = res.q_interval
            raise RegimeError([f"q = {self.q:g} outside the admissible interval ({lo:g}, {hi:g})"])
        if not self.sigma > 0:
            raise RegimeError([f"σ = {self.sigma:g} must be > 0"])

    @property
    def sigma(self) -> float:
        return sigma_value(self.n, self.beta, self.m, self.q)

    @property
    def regime(self) -> str:
        return regime_classify(self.n, self.beta, self.p, self.m).regime


def sigma_value(n, beta, m, q) -> float:
    """1/(m-1) - n/(beta q), without the admissibility checks of DecayTarget."""
    return 1.0 / (m - 1) - n / (beta * q)


def sigma_of(target: DecayTarget) -> float:
    s = target.sigma
    if not s > 0:
        raise ValueError(f"σ = {s:g} must be > 0")
    return s


def decay_fit(times, norms, window=None):
    """Least-squares slope of log ||u||_q against log t inside ``window``.

    Returns ``(slope, stderr)``.  At least 8 points must fall inside.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(norms, dtype=float)
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, y = t[sel], y[sel]
    if len(t) == 0:
        raise ValueError("empty fit window")
    if len(t) < 8:
        raise ValueError(f"need >= 8 points in the fit window, got {len(t)}")
    if np.any(y <= 0) or np.any(t <= 0):
        raise ValueError("times and norms must be positive for a log-log fit")
    if np.ptp(y) == 0:
        return 0.0, 0.0
    fit = stats.linregress(np.log(t), np.log(y))
    return float(fit.slope), float(fit.stderr)


@dataclass
class Envelope:
    C: float
    sigma: float
    t_start: float
    violations: int
    worst_ratio: float


def decay_envelope(times, norms, sigma: float, t_start: float, t_end: float = math.inf,
                   slack: float = 1e-8) -> Envelope:
    """Check norms <= C t^{-sigma} on [t_start, t_end] with C fixed at t_start."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(norms, dtype=float)
    i0 = int(np.argmin(np.abs(t - t_start)))
    C = y[i0] * t[i0] ** sigma
    sel = (t >= t[i0]) & (t <= t_end)
    ratio = y[sel] / (C * t[sel] ** (-sigma))
    return Envelope(float(C), sigma, float(t[i0]), int(np.sum(ratio > 1 + slack)),
                    float(ratio.max()))


@dataclass(frozen=True)
class SmallnessBudget:
    eps: float
    M: float
    q_aux: float
    lam: float
    p: float

    def __post_init__(self):
        if self.eps < 0 or self.M < 0 or not self.q_aux > 0 or not self.lam > 0 or not self.p > 0:
            raise ValueError("smallness budget fields must be positive")


def smallness_check(budget: SmallnessBudget) -> bool:
    """2^p lam q_aux (2 eps)^p <= 1."""
    b = budget
    return 2**b.p * b.lam * b.q_aux * (2 * b.eps) ** b.p <= 1.0


# --- series parameter selection ---------------------------------------------

@dataclass(frozen=True)
class ParameterSelection:
    k: int
    theta: float
    rho: float
    a: float
    r: float
    window: tuple
    variant: str
    residuals: dict

    def as_row(self):
        return [self.k, self.theta, self.rho, self.a, self.r, self.residuals["identity"]]


def theta_window(n, beta, p, m, q, sigma, k, variant=BOUND):
    """Open interval of admissible interpolation weights theta_k (before clipping)."""
    K = k * p + m - 1
    if variant == BOUND:
        lower = (1 - n * (p - 1) / (p * beta)) / (sigma * K)
        upper = (m - 1) / K
    elif variant == CONTRACTION:
        lower = (1 - n * (q - 1) / (q * beta)) / (sigma * K)
        upper = min(m - 1, (1 - sigma) / sigma) / K
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return lower, upper


def select_parameters(n, beta, p, m, q, sigma=None, k=0, variant=BOUND) -> ParameterSelection:
    """Choose theta_k at the midpoint of its window and derive rho_k, a, r.

    Relations enforced:

    * (1-theta)/rho = beta/(n K) - beta theta/(n(m-1)),  K = kp + m - 1
    * 1/(a K) = theta/q + (1-theta)/rho
    * 1/r = 1/p + 1/a (Bound) or 1/q + 1/a (Contraction)
    """
    target = DecayTarget(n, beta, p, m, q)
    if sigma is None:
        sigma = target.sigma
    if not math.isclose(sigma, target.sigma, rel_tol=1e-12):
        raise ValueError(f"σ = {sigma} disagrees with 1/(m-1) - n/(βq) = {target.sigma}")
    if variant == CONTRACTION:
        q_min = (m - 1) * p / (p - 1)
        if not q > q_min:
            raise ValueError(f"contraction variant needs q > (m-1)p/(p-1) = {q_min:g}, got q = {q:g}")
    if k < 0 or int(k) != k:
        raise ValueError(f"k must be a nonnegative integer, got {k}")
    K = k * p + m - 1
    lo_raw, hi_raw = theta_window(n, beta, p, m, q, sigma, k, variant)
    lo, hi = max(lo_raw, 0.0), min(hi_raw, 1.0)
    if not lo < hi:
        raise ValueError(f"empty θ window ({lo_raw:g}, {hi_raw:g}) for k = {k}")
    theta = 0.5 * (lo + hi)

    rate = beta / (n * K) - beta * theta / (n * (m - 1))
    rho = (1 - theta) / rate
    a = 1.0 / (K * (theta / q + (1 - theta) / rho))
    target_index = p if variant == BOUND else q
    r = 1.0 / (1.0 / target_index + 1.0 / a)

    arg_space = (n / beta) * (1 / r - 1 / target_index)
    arg_time = sigma * K * theta
    res = {
        "rho_relation": abs((1 - theta) / rho - rate),
        "a_relation": abs(1 / (a * K) - (theta / q + (1 - theta) / rho)),
        "r_relation": abs(1 / r - (1 / target_index + 1 / a)),
        "identity": abs(1 - arg_space - arg_time),
    }
    problems = []
    if not rho >= n * (m - 1) / beta * (1 - 1e-10):
        problems.append(f"ρ_k = {rho:g} < n(m-1)/β = {n * (m - 1) / beta:g}")
    if not r >= 1:
        problems.append(f"r = {r:g} < 1")
    if not (0 < arg_space < 1 and 0 < arg_time < 1):
        problems.append(f"beta-function arguments out of (0,1): {arg_space:g}, {arg_time:g}")
    if variant == CONTRACTION and not sigma * (1 + arg_time / sigma) < 1:
        problems.append(f"σ(1 + Kθ) = {sigma + arg_time:g} >= 1")
    if problems:
        raise ValueError("; ".join(problems))
    return ParameterSelection(int(k), theta, rho, a, r, (lo_raw, hi_raw), variant, res)


@dataclass
class GammaGrowth:
    C: float
    k0_term: float
    ratio: float
    passes: bool
    log_terms: np.ndarray

    def __bool__(self):
        return self.passes


def gamma_growth_check(k_max, n, beta, p, m, q, eps, lam, variant=BOUND) -> GammaGrowth:
    """Find C with Gamma(rho_k/p + 1)^{K(1-theta_k)/rho_k} <= C^k k! for 1 <= k <= k_max.

    The k = 0 term is returned separately as ``k0_term``.  The series
    sum (C lam)^k eps^{kp} converges when ratio = C lam eps^p < 1.
    """
    logs = []
    for k in range(k_max + 1):
        s = select_parameters(n, beta, p, m, q, k=k, variant=variant)
        K = k * p + m - 1
        logs.append(K * (1 - s.theta) / s.rho * special.gammaln(s.rho / p + 1))
    logs = np.array(logs)
    ks = np.arange(1, k_max + 1)
    if len(ks):
        logC = np.max((logs[1:] - special.gammaln(ks + 1)) / ks)
        C = float(math.exp(max(logC, 0.0)))
    else:
        C = 1.0
    ratio = C * lam * eps**p
    return GammaGrowth(C, float(math.exp(logs[0])), ratio, ratio < 1, logs)


# --- empirical decay runs ---------------------------------------------------

@dataclass(frozen=True)
class DecayCase:
    n: int
    beta: float
    p: float
    m: float
    q: float
    L: float
    N: int
    t_end: float
    dt: float
    t_start: float
    width: float = 1.0
    exp_norm_target: float = 0.01
    lam: float = 1.0
    sign: int = 1
    save_every: int = 1

    @property
    def target(self) -> DecayTarget:
        return DecayTarget(self.n, self.beta, self.p, self.m, self.q)


@dataclass
class DecayRun:
    case: DecayCase
    times: np.ndarray
    norms: np.ndarray
    amplitude: float
    status: object
    slope: float
    stderr: float
    envelope: Envelope


def run_decay_case(case: DecayCase) -> DecayRun:
    """Evolve a Gaussian bump scaled to the requested exp L^p size and fit the decay."""
    sigma = sigma_of(case.target)
    spec = make_grid(case.n, case.L, case.N)
    if case.t_end ** (1.0 / case.beta) > case.L / 4:
        raise ValueError(f"t_end^(1/β) exceeds L/4 = {case.L / 4}")
    unit = from_callable(spec, lambda *x: np.exp(-sum(c**2 for c in x) / case.width**2))
    amp = case.exp_norm_target / orlicz.exp_norm(unit, case.p)
    u0 = unit * amp
    f = Nonlinearity(case.m, case.p, case.lam, case.sign)
    steps = int(round(case.t_end / case.dt))
    times, norms = [], []

    def record(t, u):
        times.append(t)
        norms.append(lq_norm(u, case.q))

    _, status = step_evolve(u0, f, case.beta, case.dt, steps, save_every=case.save_every,
                            blow_threshold=1e6, callback=record)
    times, norms = np.array(times), np.array(norms)
    slope, err = decay_fit(times, norms, (case.t_start, case.t_end))
    env = decay_envelope(times, norms, sigma, case.t_start, case.t_end)
    return DecayRun(case, times, norms, amp, status, slope, err, env)


# --- inequality property suite ------------------------------------------------

@dataclass
class SuiteReport:
    samples: int
    violations: dict
    applicable: dict

    def total_violations(self) -> int:
        return sum(self.violations.values())


def inequality_suite(spec, p, q_lq, q_exp, lam, samples=100, seed=0,
                     betas=(0.5, 1.0, 2.0), times=(0.01, 0.1, 1.0), slack=1e-8,
                     tol=1e-12) -> SuiteReport:
    """Count violations of the exp L^p inequalities over seeded random fields.

    Checked per field:

    * ``exp_embedding``: ||u||_{exp L^p} <= (ln 2)^{-1/p}(||u||_{q_exp} + ||u||_inf)
    * ``lq_embedding``: ||u||_{q_lq} <= Gamma(q_lq/p + 1)^{1/q_lq} ||u||_{exp L^p}
    * ``moment``: ||e^{lam|u|^p} - 1||_{q_lq} <= (lam q_lq K^p)^{1/q_lq} when gated
    * ``nonexpansive``: ||exp(-tA)u||_{exp L^p} <= ||u||_{exp L^p}

    Field amplitudes are log-uniform on [0.05, 2] so the moment gate is
    met by part of the sample.
    """
    from .fields import random_field, rng_from_seed
    from .semigroup import exp_norm_nonexpansive

    rng = rng_from_seed(seed)
    keys = ("exp_embedding", "lq_embedding", "moment", "nonexpansive")
    viol = dict.fromkeys(keys, 0)
    appl = dict.fromkeys(keys, 0)
    for _ in range(samples):
        amp = float(np.exp(rng.uniform(np.log(0.05), np.log(2.0))))
        u = random_field(spec, rng, bumps=int(rng.integers(1, 6)), amp=amp)
        if u.is_zero():
            continue
        lhs, rhs = orlicz.embedding_exp_bound(u, p, q_exp, tol)
        appl["exp_embedding"] += 1
        viol["exp_embedding"] += lhs > rhs * (1 + slack)
        lhs, rhs = orlicz.embedding_lq_bound(u, p, q_lq, tol)
        appl["lq_embedding"] += 1
        viol["lq_embedding"] += lhs > rhs * (1 + slack)
        mb = orlicz.exp_moment_bound(u, p, lam, q_lq, tol)
        if mb.applicable:
            appl["moment"] += 1
            viol["moment"] += mb.lhs > mb.rhs * (1 + slack)
        for beta in betas:
            appl["nonexpansive"] += len(times)
            viol["nonexpansive"] += exp_norm_nonexpansive(u, beta, p, times, slack, tol)
    return SuiteReport(samples, {k: int(v) for k, v in viol.items()}, appl)
