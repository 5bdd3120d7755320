import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import integrate

from rmt_portfolio import rmt_core
from rmt_portfolio.errors import BranchError, DivergenceError, DomainError


def quad_stieltjes(theta, alpha):
    """Independent oracle: integrate the density against 1/(l - theta)."""
    sup = rmt_core.mp_support(alpha)
    val, _ = integrate.quad(lambda x: rmt_core.mp_density(x, alpha) / (x - theta),
                            sup.lambda_minus, sup.lambda_plus, limit=200, epsabs=1e-13)
    return val + sup.zero_mass / (0.0 - theta) if sup.zero_mass else val


def test_support_values():
    s = rmt_core.mp_support(2.0)
    assert_allclose([s.lambda_minus, s.lambda_plus], [3 - 2 * math.sqrt(2), 3 + 2 * math.sqrt(2)], rtol=0, atol=1e-15)
    assert s.zero_mass == 0.0
    assert rmt_core.mp_support(0.5).zero_mass == 0.5
    assert rmt_core.mp_support(1.0).lambda_minus == 0.0


@pytest.mark.parametrize("alpha", [0.3, 0.5, 1.0, 2.0, 4.0])
def test_density_mass(alpha):
    sup = rmt_core.mp_support(alpha)
    mass, _ = integrate.quad(lambda x: rmt_core.mp_density(x, alpha), sup.lambda_minus, sup.lambda_plus, limit=200)
    assert abs(mass + sup.zero_mass - 1.0) < 1e-7


def test_density_vectorised_and_zero_outside():
    x = np.array([-1.0, 0.0, 0.1, 1.0, 100.0])
    d = rmt_core.mp_density(x, 2.0)
    assert d.shape == x.shape
    assert d[0] == d[1] == d[2] == d[-1] == 0.0
    assert d[3] > 0
    assert isinstance(rmt_core.mp_density(1.0, 2.0), float)


@pytest.mark.parametrize("theta,alpha,expected", [
    (-1.0, 2.0, math.sqrt(2) - 1),      # positive root of -S^2 - 2S + 1
    (7.0, 2.0, (math.sqrt(2) - 3) / 7),  # root of 7S^2 + 6S + 1 nearer zero
    (0.0, 2.0, 1.0),                    # 1 / (alpha - 1)
    (0.0, 4.0, 1.0 / 3.0),
])
def test_stieltjes_frozen(theta, alpha, expected):
    assert_allclose(rmt_core.stieltjes(theta, alpha), expected, rtol=1e-11)


@pytest.mark.parametrize("theta,alpha", [(-1.0, 2.0), (0.1, 2.0), (7.0, 2.0), (-0.4, 0.5), (3.5, 0.5), (12.0, 3.0)])
def test_stieltjes_matches_quadrature(theta, alpha):
    assert_allclose(rmt_core.stieltjes(theta, alpha), quad_stieltjes(theta, alpha), rtol=1e-8)


def test_derivative_at_zero():
    # S'(0) = alpha / (alpha - 1)^3 for alpha > 1
    assert_allclose(rmt_core.stieltjes_derivative(0.0, 2.0), 2.0, rtol=1e-12)
    assert_allclose(rmt_core.stieltjes_derivative(0.0, 3.0), 3.0 / 8.0, rtol=1e-12)


def test_near_zero_is_smooth():
    vals = [rmt_core.stieltjes(t, 2.0) for t in (-1e-9, 0.0, 1e-9)]
    assert_allclose(vals, 1.0, rtol=1e-8)


def test_errors():
    with pytest.raises(DivergenceError):
        rmt_core.stieltjes(0.0, 0.5)
    with pytest.raises(DivergenceError):
        rmt_core.stieltjes(0.0, 1.0)
    with pytest.raises(BranchError):
        rmt_core.stieltjes(1.0, 2.0)
    with pytest.raises(BranchError):
        rmt_core.stieltjes(3 + 2 * math.sqrt(2), 2.0)
    with pytest.raises(DomainError):
        rmt_core.stieltjes(1.0, -1.0)
    with pytest.raises(DomainError):
        rmt_core.stieltjes(math.nan, 2.0)


def test_market_shape():
    s = rmt_core.MarketShape.from_counts(1000, 2000)
    assert s.alpha == 2.0
    assert rmt_core.MarketShape.from_alpha(100, 0.8).num_periods == 80
    with pytest.raises(DomainError):
        rmt_core.MarketShape(0.0)
    with pytest.raises(DomainError):
        rmt_core.MarketShape(2.0, 10, 30)


outside = st.tuples(st.floats(0.05, 8.0), st.floats(1e-6, 50.0), st.booleans())


def _theta(alpha, gap, below):
    sup = rmt_core.mp_support(alpha)
    if below:
        return (sup.lambda_minus - gap) if alpha > 1 else -gap
    return sup.lambda_plus + gap


@settings(max_examples=300, deadline=None)
@given(outside)
def test_quadratic_identity_property(args):
    alpha, gap, below = args
    th = _theta(alpha, gap, below)
    s = rmt_core.stieltjes(th, alpha)
    assert abs(rmt_core.quadratic_residual(th, s, alpha)) <= 1e-10 * max(1.0, abs(th) * s * s)


@settings(max_examples=200, deadline=None)
@given(outside)
def test_sign_and_monotonicity_property(args):
    alpha, gap, below = args
    th = _theta(alpha, gap, below)
    s = rmt_core.stieltjes(th, alpha)
    # S is an integral of a positive measure against 1/(l - theta): increasing in theta
    assert rmt_core.stieltjes_derivative(th, alpha) > 0
    if th > rmt_core.mp_support(alpha).lambda_plus:
        assert s < 0
    else:
        assert s > 0


@settings(max_examples=200, deadline=None)
@given(st.tuples(st.floats(0.1, 6.0), st.floats(1e-3, 20.0), st.booleans()))
def test_derivative_matches_finite_difference(args):
    alpha, gap, below = args
    th = _theta(alpha, gap, below)
    h = 1e-6 * min(gap, 1.0)
    fd = (rmt_core.stieltjes(th + h, alpha) - rmt_core.stieltjes(th - h, alpha)) / (2 * h)
    assert_allclose(rmt_core.stieltjes_derivative(th, alpha), fd, rtol=1e-6)
