import math

import numpy as np
import pytest
from scipy.special import exp1

from fraclab import orlicz
from fraclab.fields import gaussian_bump
from fraclab.grid import GridFunction, lp_linf, lq_norm, make_grid, zeros
from fraclab.semigroup import EvolutionParams, apply_semigroup, symbol
from fraclab.solver import (
    CONVERGED,
    DIVERGED,
    ITERATION_CAP,
    DivergenceError,
    Nonlinearity,
    SolveConfig,
    Trajectory,
    blowup_monitor,
    duhamel_apply,
    duhamel_integral,
    eval_f,
    lipschitz_constant,
    lipschitz_witness,
    local_time_estimate,
    picard_continue,
    picard_solve,
    step_evolve,
)

SPEC = make_grid(1, 20.0, 1024)
SMALL = make_grid(1, 20.0, 256)


def const(spec, c):
    return GridFunction(spec, np.full(spec.shape, c))


def test_eval_f_examples():
    assert eval_f(Nonlinearity(1, 2, 1, 1), zeros(SMALL)).is_zero()
    assert eval_f(Nonlinearity(1, 2, 1, 1), const(SMALL, 1.0)).values[0] == pytest.approx(math.e)
    assert eval_f(Nonlinearity(2, 2, 1, 1), const(SMALL, 0.5)).values[0] == pytest.approx(
        0.25 * math.exp(0.25))
    assert eval_f(Nonlinearity(2, 2, 1, -1), const(SMALL, -0.5)).values[0] == pytest.approx(
        0.25 * math.exp(0.25))


def test_eval_f_overflow_is_divergence():
    with pytest.raises(DivergenceError):
        eval_f(Nonlinearity(1, 2, 1, 1), const(SMALL, 30.0))
    assert issubclass(DivergenceError, FloatingPointError)


@pytest.mark.parametrize("bad", [dict(m=0.5), dict(p=1.0), dict(lam=0.0), dict(sign=2)])
def test_nonlinearity_validation(bad):
    with pytest.raises(ValueError):
        Nonlinearity(**{**dict(m=1, p=2, lam=1, sign=1), **bad})


def test_lipschitz_constant_matches_diagonal_limit():
    # m=1, p=2, lam=1: |f'(u)| / (2 e^{u^2}) = 1/2 + u^2, maximal at u = A
    f = Nonlinearity(1, 2, 1, 1)
    for A in (0.3, 0.5, 1.0, 2.0):
        assert lipschitz_constant(f, A) == pytest.approx(0.5 + A**2, rel=1e-3)


def test_lipschitz_witness_trivial_cases():
    f = Nonlinearity(2, 2, 1, 1)
    u = gaussian_bump(SMALL, 1.5)
    lhs, rhs = lipschitz_witness(f, u, u)
    assert not np.any(lhs)
    lhs, rhs = lipschitz_witness(f, u, zeros(SMALL))
    assert np.all(lhs <= rhs * (1 + 1e-12))


@pytest.mark.parametrize("m", [1, 2, 3])
def test_lipschitz_witness_random_pairs(m):
    f = Nonlinearity(m, 2, 1, 1)
    rng = np.random.default_rng(7)
    C = lipschitz_constant(f, 2.0, points=2001)
    for _ in range(20):
        u = GridFunction(SMALL, rng.uniform(-2, 2, SMALL.shape))
        v = GridFunction(SMALL, rng.uniform(-2, 2, SMALL.shape))
        lhs, rhs = lipschitz_witness(f, u, v, C)
        assert np.all(lhs <= rhs * (1 + 1e-9))


def test_local_time_estimate_examples():
    f = Nonlinearity(1, 2, 1, 1)
    assert local_time_estimate(0.5, f, 1.0) == pytest.approx(1 / (4 * math.e))
    assert local_time_estimate(0.0, f, 2.0) == pytest.approx(1 / 8)
    g = Nonlinearity(1, 1.0000001, 0.7, 1)
    ratio = local_time_estimate(0.6, g, 1.0) / local_time_estimate(0.3, g, 1.0)
    assert ratio == pytest.approx(math.exp(-2 * 0.7 * 0.3), rel=1e-6)
    assert local_time_estimate(100.0, f, 1.0) == 0.0
    with pytest.raises(ValueError):
        local_time_estimate(1.0, f, 0.0)


def test_duhamel_apply_trivial_cases():
    f = Nonlinearity(1, 2, 1, 1)
    u0 = gaussian_bump(SMALL, 0.3)
    times = np.linspace(0, 0.1, 5)
    traj = Trajectory(times, [zeros(SMALL)] * 5, EvolutionParams(2.0), f)
    assert duhamel_apply(traj, u0, 0) is u0
    out = duhamel_apply(traj, u0, 4)
    assert np.allclose(out.values, apply_semigroup(u0, 2.0, 0.1).values, atol=1e-15)


def test_duhamel_constant_forcing_second_order():
    beta, T = 2.0, 0.5
    g = gaussian_bump(SMALL, 1.0, width=0.5) + 0.1
    # modewise closed form: (1 - e^{-Ta}) / a, and T on the zero mode
    a = symbol(SMALL, beta, half=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(a > 0, -np.expm1(-T * a) / a, T)
    exact = np.fft.irfft(w * np.fft.rfft(g.values), n=SMALL.N)
    errs = []
    for M in (10, 20, 40):
        times = np.linspace(0, T, M + 1)
        approx = duhamel_integral(times, [g] * (M + 1), beta, M)
        errs.append(np.max(np.abs(approx.values - exact)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.9)


def test_picard_zero_data():
    traj, st = picard_solve(zeros(SMALL), Nonlinearity(1, 2, 1, 1), 2.0, SolveConfig(0.05))
    assert st.outcome == CONVERGED and st.iterations == 1
    assert all(s.is_zero() for s in traj.states)


def _contraction_case():
    f = Nonlinearity(1, 2, 1.0, 1)
    u0 = gaussian_bump(SPEC)
    u0 = u0 * (0.5 / lp_linf(u0, 2))
    C = lipschitz_constant(f, 2 * 0.5)
    cfg = SolveConfig(local_time_estimate(0.5, f, C), picard_tol=1e-8)
    return u0, f, cfg


def test_picard_residual_and_uniqueness():
    u0, f, cfg = _contraction_case()
    a, sa = picard_solve(u0, f, 2.0, cfg)
    b, sb = picard_solve(u0, f, 2.0, cfg, initial="constant")
    assert sa.outcome == sb.outcome == CONVERGED
    assert sa.residual <= 2 * cfg.picard_tol and sb.residual <= 2 * cfg.picard_tol
    assert a.states[0] is u0
    gap = max(np.max(np.abs(x.values - y.values)) for x, y in zip(a.states, b.states))
    assert gap <= 10 * cfg.picard_tol
    assert all(r >= 0 for r in sa.contraction_ratios)


def test_picard_sign_symmetry():
    u0, f, cfg = _contraction_case()
    a, _ = picard_solve(u0, f, 2.0, cfg)
    b, _ = picard_solve(-u0, f, 2.0, cfg)
    assert max(np.max(np.abs(x.values + y.values)) for x, y in zip(a.states, b.states)) < 1e-14


def test_picard_iteration_cap():
    u0, f, cfg = _contraction_case()
    cfg.max_iter = 2
    _, st = picard_solve(u0, f, 2.0, cfg)
    assert st.outcome == ITERATION_CAP and st.iterations == 2


def test_picard_rejects_unknown_start():
    u0, f, cfg = _contraction_case()
    with pytest.raises(ValueError):
        picard_solve(u0, f, 2.0, cfg, initial="random")


def test_picard_large_data_diverges():
    f = Nonlinearity(1, 2, 1.0, 1)
    traj, st = picard_continue(gaussian_bump(SPEC, 20.0), f, 2.0, SolveConfig(1.0), min_window=1e-4)
    assert st.outcome == DIVERGED
    assert math.isfinite(st.t_max_estimate)
    assert all(np.all(np.isfinite(s.values)) for s in traj.states)


def test_continuation_blowup_time_brackets_ode():
    # spatially flat data blow up at the ODE time int_A^inf du/(u e^{u^2}) = E1(A^2)/2;
    # diffusion can only delay the blow-up of a bump
    A = 2.0
    t_ode = 0.5 * exp1(A**2)
    f = Nonlinearity(1, 2, 1.0, 1)
    _, st = picard_continue(gaussian_bump(SPEC, A), f, 2.0,
                            SolveConfig(1.0, quad_points=20000), min_window=1e-4)
    assert st.outcome == DIVERGED
    assert 0.95 * t_ode <= st.t_max_estimate <= 1.5 * t_ode


def test_continuation_reaches_horizon_for_small_data():
    f = Nonlinearity(2, 2, 1.0, -1)
    traj, st = picard_continue(gaussian_bump(SMALL, 0.2), f, 2.0, SolveConfig(0.5, quad_points=200))
    assert st.outcome == CONVERGED
    assert traj.times[-1] == pytest.approx(0.5)
    assert st.windows >= 2


def test_linear_comparison_scales_like_alpha_power_m():
    m = 3
    f = Nonlinearity(m, 2, 1.0, 1)
    u0 = gaussian_bump(SPEC)
    gaps = []
    for alpha in (0.2, 0.1, 0.05, 0.025):
        traj, st = picard_solve(u0 * alpha, f, 2.0, SolveConfig(0.1, picard_tol=1e-14))
        gaps.append(lq_norm(traj.final() - apply_semigroup(u0 * alpha, 2.0, 0.1), np.inf))
    orders = np.log2(np.array(gaps[:-1]) / np.array(gaps[1:]))
    assert abs(orders[-1] - m) < 0.1
    assert gaps[-1] / 0.025 < gaps[0] / 0.2


def test_nonlinear_continuity_at_zero():
    # ||u(t) - e^{-tA}u0||_{exp L^p} ~ t ||f(u0)||, below C(t + t^{1 - n/(beta q)})
    f = Nonlinearity(2, 2, 1.0, 1)
    u0 = gaussian_bump(SPEC, 0.5)
    traj, st = picard_solve(u0, f, 2.0, SolveConfig(0.1, quad_points=2000))
    assert st.outcome == CONVERGED
    q, n, beta = 4.0, 1, 2.0
    bound = orlicz.exp_norm(eval_f(f, u0), 2)
    gaps = []
    for i in (1, 10, 100, 200):
        t = traj.times[i]
        gap = orlicz.exp_norm(traj.states[i] - apply_semigroup(u0, beta, t), 2)
        gaps.append(gap)
        assert gap <= bound * (t + t ** (1 - n / (beta * q)))
    assert np.all(np.diff(gaps) > 0)


def test_etd_linear_limit():
    f = Nonlinearity(8, 2, 1.0, 1)
    u0 = gaussian_bump(SPEC, 1e-3)
    traj, _ = step_evolve(u0, f, 2.0, 0.01, 10)
    for t, s in zip(traj.times, traj.states):
        assert np.max(np.abs(s.values - apply_semigroup(u0, 2.0, t).values)) < 1e-12


def test_etd_first_order():
    f = Nonlinearity(2, 2, 1.0, 1)
    u0 = gaussian_bump(SPEC, 0.5)
    finals = [step_evolve(u0, f, 2.0, dt, int(round(0.5 / dt)), save_every=10**9)[0].final().values
              for dt in (0.02, 0.01, 0.005)]
    e1 = np.max(np.abs(finals[0] - finals[1]))
    e2 = np.max(np.abs(finals[1] - finals[2]))
    assert math.log2(e1 / e2) >= 0.9


def test_etd_zero_data_and_saving():
    f = Nonlinearity(1, 2, 1.0, 1)
    traj, st = step_evolve(zeros(SMALL), f, 2.0, 0.1, 7, save_every=3)
    assert list(traj.times) == pytest.approx([0, 0.3, 0.6, 0.7])
    assert all(s.is_zero() for s in traj.states)
    assert st.outcome == CONVERGED


def test_etd_blowup_crosses_threshold():
    f = Nonlinearity(1, 2, 1.0, 1)
    seen = []
    traj, st = step_evolve(gaussian_bump(SPEC, 2.0), f, 2.0, 1e-5, 1000,
                           blow_threshold=6.0, callback=lambda t, u: seen.append(t))
    assert st.outcome == DIVERGED and st.reason == "threshold"
    assert lp_linf(traj.final(), 2) > 6.0
    assert st.t_max_estimate == traj.times[-1] == seen[-1]


def test_etd_overflow_keeps_last_finite_state():
    # e^{u^2} overflows near |u| = 26.5, before a cap of 1e3 on the norm is reached
    f = Nonlinearity(1, 2, 1.0, 1)
    traj, st = step_evolve(gaussian_bump(SPEC, 2.0), f, 2.0, 1e-5, 1000, blow_threshold=1e3)
    assert st.outcome == DIVERGED and st.reason == "overflow"
    assert st.t_max_estimate == traj.times[-1]
    assert all(np.all(np.isfinite(s.values)) for s in traj.states)


def test_blowup_monitor():
    f = Nonlinearity(1, 2, 1.0, -1)
    traj, _ = step_evolve(gaussian_bump(SMALL, 0.5), f, 2.0, 0.01, 20)
    assert blowup_monitor(traj, 2, math.inf).outcome == CONVERGED
    assert blowup_monitor(traj, 2, 10.0).outcome == CONVERGED
    st = blowup_monitor(traj, 2, 0.5)
    assert st.outcome == DIVERGED and st.t_max_estimate == 0.0


def test_trajectory_validation():
    f = Nonlinearity()
    with pytest.raises(ValueError):
        Trajectory([0.0, 0.0], [zeros(SMALL)] * 2, EvolutionParams(1.0), f)
    with pytest.raises(ValueError):
        Trajectory([0.0], [], EvolutionParams(1.0), f)


def test_solve_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(0.0)
    with pytest.raises(ValueError):
        SolveConfig(1.0, picard_tol=0.0)
