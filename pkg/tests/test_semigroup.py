import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from fraclab import semigroup as sg
from fraclab.fields import gaussian_bump
from fraclab.grid import indicator, lq_norm, make_grid, zeros


def test_check_beta_message():
    with pytest.raises(ValueError, match=r"β must lie in \(0,2\]"):
        sg.check_beta(2.5)
    with pytest.raises(ValueError):
        sg.check_beta(0.0)


def test_time_zero_is_identity():
    spec = make_grid(1, 10.0, 64)
    u = gaussian_bump(spec)
    assert sg.apply_semigroup(u, 1.0, 0.0) is u
    with pytest.raises(ValueError):
        sg.apply_semigroup(u, 1.0, -1.0)


@pytest.mark.parametrize("n", [1, 2])
def test_gaussian_kernel(n):
    spec = make_grid(n, 20.0, 512 if n == 1 else 128)
    k = sg.kernel_realspace(spec, 2.0, 1.0)
    assert np.max(np.abs(k.values - sg.gaussian_kernel(spec.radius(), 1.0, n))) < 1e-10


@settings(max_examples=20, deadline=None)
@given(beta=st.floats(0.1, 2.0), t=st.floats(0.01, 2.0), s=st.floats(0.01, 2.0))
def test_semigroup_property(beta, t, s):
    spec = make_grid(1, 10.0, 128)
    u = gaussian_bump(spec, width=0.7)
    a = sg.apply_semigroup(sg.apply_semigroup(u, beta, s), beta, t)
    b = sg.apply_semigroup(u, beta, t + s)
    assert np.max(np.abs(a.values - b.values)) < 1e-13


@settings(max_examples=20, deadline=None)
@given(beta=st.floats(0.1, 2.0), t=st.floats(0.01, 5.0))
def test_l1_and_linf_contraction_for_positive_data(beta, t):
    # the kernel is a probability density, so positive data keep their mass
    spec = make_grid(1, 30.0, 512)
    u = gaussian_bump(spec, width=2.0)
    w = sg.apply_semigroup(u, beta, t)
    assert np.sum(w.values) == pytest.approx(np.sum(u.values), rel=1e-12)
    assert lq_norm(w, np.inf) <= lq_norm(u, np.inf) * (1 + 1e-12)


def test_smoothing_preserves_l2_bound():
    spec = make_grid(1, 32.0, 4096)
    res = sg.smoothing_estimate(indicator(spec, 0.0), 1.0, 2, 2, np.geomspace(0.01, 1, 10))
    assert np.all(res.constants <= 1 + 1e-12)


def test_smoothing_window_guard():
    spec = make_grid(1, 4.0, 64)
    with pytest.raises(ValueError, match="validity window"):
        sg.smoothing_estimate(indicator(spec, 0.0), 2.0, 1, np.inf, [1.0, 100.0])
    with pytest.raises(ValueError):
        sg.smoothing_estimate(indicator(spec, 0.0), 2.0, 3, 2, [0.1])


def test_exp_smoothing_profile_is_bounded():
    spec = make_grid(1, 64.0, 8192)
    phi = gaussian_bump(spec, width=0.5)
    res = sg.exp_smoothing_profile(phi, 1.0, 2.0, 1.0, np.geomspace(0.01, 10, 12))
    assert np.isfinite(res.constant) and res.constant > 0
    with pytest.raises(ValueError):
        sg.exp_smoothing_profile(zeros(spec), 1.0, 2.0, 1.0, [0.1])


def test_nonexpansive_on_zero_field():
    assert sg.exp_norm_nonexpansive(zeros(make_grid(1, 4.0, 64)), 1.0, 2.0, [0.1]) == 0


def _kappa_quad(regime, n, beta, p, r=None):
    f = lambda t: float(sg.kappa_profile(regime, n, beta, p, t, 1.0, r))
    pieces = [(0, 1e-6), (1e-6, 1e-2), (1e-2, 1), (1, 1e2), (1e2, np.inf)]
    return sum(integrate.quad(f, a, b, limit=500, epsabs=1e-13, epsrel=1e-12)[0] for a, b in pieces)


@pytest.mark.parametrize("case", [
    (sg.SUBCRITICAL, 3, 1.0, 2.0, 4.0),
    (sg.CRITICAL, 2, 1.0, 2.0, None),
])
def test_kappa_integral_matches_adaptive_quadrature(case):
    regime, n, beta, p, r = case
    res = sg.kappa_integral(regime, n, beta, p, r=r)
    assert res.converged
    assert res.value == pytest.approx(_kappa_quad(regime, n, beta, p, r), rel=1e-7)


def test_kappa_gates():
    with pytest.raises(ValueError, match="subcritical"):
        sg.kappa_profile(sg.SUBCRITICAL, 3, 1.6, 2.0, 1.0, r=4.0)
    with pytest.raises(ValueError, match="r > n/β"):
        sg.kappa_profile(sg.SUBCRITICAL, 3, 1.0, 2.0, 1.0, r=2.0)
    with pytest.raises(ValueError, match="critical"):
        sg.kappa_profile(sg.CRITICAL, 2, 1.1, 2.0, 1.0)
    with pytest.raises(ValueError):
        sg.kappa_profile("other", 2, 1.0, 2.0, 1.0)


def test_kappa_profile_branches():
    t = np.array([1e-6, 1e6])
    k = sg.kappa_profile(sg.SUBCRITICAL, 3, 1.0, 2.0, t, C=2.0, r=4.0)
    assert k[0] == pytest.approx(2.0 * (1e-6 ** -0.75 + 1))
    x = 1e6 ** -3.0
    assert k[1] == pytest.approx(2.0 * x * math.log1p(x) ** -0.5)
