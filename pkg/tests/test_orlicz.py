import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fraclab import orlicz
from fraclab.fields import random_field, rng_from_seed
from fraclab.grid import from_callable, indicator, lq_norm, make_grid, support_measure, zeros

SPEC = make_grid(1, 8.0, 256)


def test_gauge_values():
    s = np.array([0.0, 0.5, 1.0])
    assert np.allclose(orlicz.ExpLp(2)(s), np.expm1(s**2))
    assert np.allclose(orlicz.ExpLpReduced(1)(s), np.exp(s) - 1 - s)
    assert np.allclose(orlicz.Power(3)(s), s**3)
    assert orlicz.ExpLp(1)(np.array([800.0]))[0] == np.inf


def test_reduced_gauge_small_argument_series():
    x = np.array([1e-6, 1e-3, 0.05, 0.099, 0.2])
    # exact values via the full Taylor sum in extended precision
    exact = np.array([float(sum(np.longdouble(v) ** k / math.factorial(k) for k in range(2, 30)))
                      for v in x])
    assert np.allclose(orlicz.ExpLpReduced(1)(x), exact, rtol=1e-13, atol=0)


def test_gauge_rejects_bad_input():
    with pytest.raises(ValueError):
        orlicz.OrliczGauge("cosh", 2)
    with pytest.raises(ValueError):
        orlicz.ExpLp(0.5)


def test_zero_field_has_zero_norm():
    assert orlicz.exp_norm(zeros(SPEC), 2) == 0.0


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0])
@pytest.mark.parametrize("nodes", [1, 5, 32])
def test_indicator_closed_form(p, nodes):
    u = indicator(SPEC, measure=nodes * SPEC.h, amplitude=1.7)
    expected = orlicz.indicator_exp_norm(support_measure(u), p, 1.7)
    assert orlicz.exp_norm(u, p, tol=1e-12) == pytest.approx(expected, rel=1e-9)


def test_luxemburg_power_gauge_is_lp_norm():
    u = from_callable(SPEC, lambda x: np.exp(-x**2) * np.cos(x))
    for p in (1.0, 2.0, 3.5):
        res = orlicz.luxemburg_norm(u, orlicz.Power(p), tol=1e-12)
        assert res.norm == pytest.approx(lq_norm(u, p), rel=1e-10)


def test_luxemburg_returns_upper_end():
    u = from_callable(SPEC, lambda x: 3 * np.exp(-x**2))
    res = orlicz.luxemburg_norm(u, orlicz.ExpLp(2), tol=1e-8)
    assert orlicz.gauge_integral(u, orlicz.ExpLp(2), res.norm) <= 1.0
    lo, hi = res.bracket
    assert orlicz.gauge_integral(u, orlicz.ExpLp(2), lo) > 1.0
    assert hi - lo <= 1e-8 * hi


def test_luxemburg_rejects_tolerance():
    with pytest.raises(ValueError):
        orlicz.luxemburg_norm(zeros(SPEC), orlicz.ExpLp(2), tol=0.1)


def test_reduced_gauge_constant_p1():
    # s* solves e^s - s = 2
    s = 1.0 / orlicz.reduced_gauge_constant(1.0)
    assert math.exp(s) - s == pytest.approx(2.0, abs=1e-12)
    assert orlicz.reduced_gauge_constant(1.0) == pytest.approx(0.87245, abs=1e-5)


def test_moment_bound_gate():
    big = from_callable(SPEC, lambda x: 5 * np.exp(-x**2))
    res = orlicz.exp_moment_bound(big, 2, 1.0, 2)
    assert not res.applicable and math.isnan(res.lhs)


def _field(seed, amp):
    return random_field(SPEC, rng_from_seed(seed), bumps=3, amp=amp)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**63 - 1), amp=st.floats(0.01, 5), c=st.floats(0.1, 10))
def test_exp_norm_is_homogeneous(seed, amp, c):
    u = _field(seed, amp)
    if u.is_zero():
        return
    assert orlicz.exp_norm(u * c, 2, 1e-12) == pytest.approx(c * orlicz.exp_norm(u, 2, 1e-12), rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**63 - 1), amp=st.floats(0.01, 3))
def test_exp_norm_triangle_inequality(seed, amp):
    u, v = _field(seed, amp), _field(seed + 1, amp)
    lhs = orlicz.exp_norm(u + v, 2)
    assert lhs <= (orlicz.exp_norm(u, 2) + orlicz.exp_norm(v, 2)) * (1 + 1e-8)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**63 - 1), amp=st.floats(0.01, 3), p=st.floats(1.0, 3.0),
       q=st.floats(1.0, 12.0))
def test_embeddings(seed, amp, p, q):
    u = _field(seed, amp)
    if u.is_zero():
        return
    lhs, rhs = orlicz.embedding_lq_bound(u, p, max(p, q))
    assert lhs <= rhs * (1 + 1e-8)
    lhs, rhs = orlicz.embedding_exp_bound(u, p, min(p, q))
    assert lhs <= rhs * (1 + 1e-8)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**63 - 1), amp=st.floats(0.01, 2), p=st.floats(1.0, 3.0))
def test_reduced_norm_equivalence(seed, amp, p):
    u = _field(seed, amp)
    if u.is_zero():
        return
    ratio = orlicz.norm_equivalence_reduced(u, p)
    # upper: reduced gauge <= full gauge and ||u||_p <= ||u||_{exp L^p};
    # lower: convexity of both pieces at lam = ||u||_p + ||u||_reduced
    assert 1 - 1e-8 <= ratio <= 2 + 1e-8


def test_norm_equivalence_rejects_zero():
    with pytest.raises(ValueError):
        orlicz.norm_equivalence_reduced(zeros(SPEC), 2)
