import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.optimize import brentq

from rmt_portfolio import rmt_core, theory
from rmt_portfolio.errors import DegeneracyError, DomainError


def q_of_theta(theta, alpha):
    s = rmt_core.stieltjes(theta, alpha)
    return rmt_core.stieltjes_derivative(theta, alpha) / (s * s)


def stationary_oracle(alpha, tau, lower=True):
    """Solve q(theta) = tau on one branch by bracketing and return (eps, theta)."""
    sup = rmt_core.mp_support(alpha)
    if lower:
        hi = sup.lambda_minus - 1e-10 if alpha > 1 else -1e-10
        lo = hi - 1.0
        while q_of_theta(lo, alpha) > tau:
            lo = 2 * lo - hi
        theta = brentq(lambda t: q_of_theta(t, alpha) - tau, lo, hi, xtol=1e-15, rtol=1e-15)
    else:
        lo = sup.lambda_plus + 1e-10
        hi = lo + 1.0
        while q_of_theta(hi, alpha) > tau:
            hi = 2 * hi - lo
        theta = brentq(lambda t: q_of_theta(t, alpha) - tau, lo, hi, xtol=1e-15, rtol=1e-15)
    return theory.epsilon_of_theta(theta, alpha, tau), theta


FROZEN = [
    (theory.primal_min, 2.0, 2.0, 0.5, 0.0),
    (theory.primal_min, 2.0, 1.5, 0.525255, -0.265986),
    (theory.primal_max, 2.0, 2.0, 4.5, 6.0),
    (theory.dual_max, 2.0, 1.5, 5.949490, 0.159592),
    (theory.dual_min, 2.0, 1.5, 1.050510, -3.759592),
    (theory.dual_max, 2.0, 2.0, 9.0, 1.0 / 6.0),
]


@pytest.mark.parametrize("fn,alpha,x,obj,mult", FROZEN)
def test_published_values(fn, alpha, x, obj, mult):
    res = fn(alpha, x)
    assert_allclose(res.objective, obj, atol=5e-7)
    assert_allclose(res.multiplier, mult, atol=5e-7)


def test_uniform_and_budget_only_limits():
    assert theory.primal_min(2, 1).objective == 1.0
    assert theory.primal_min(2, 1).multiplier == -math.inf
    assert theory.primal_max(2, 1).multiplier == math.inf
    res = theory.dual_min(2, 2)
    assert res.objective == 1.0 and res.regime == theory.UNIFORM and res.multiplier_is_infinite
    assert res.as_dict()["multiplier"] is None
    b = theory.budget_only(2)
    assert_allclose([b.epsilon, b.q_w], [0.5, 2.0], rtol=1e-14)
    assert_allclose(theory.dual_max(2, 1).objective, 2.0, rtol=1e-14)
    assert theory.dual_max(2, 1).regime == theory.BUDGET_ONLY
    with pytest.raises(DegeneracyError):
        theory.budget_only(0.8)


def test_zero_risk_regime():
    # alpha = 0.5: the null space supports zero-risk portfolios once tau >= 2
    assert theory.primal_min(0.5, 3.0).objective == 0.0
    assert theory.primal_min(0.5, 3.0).regime == theory.ZERO_RISK
    assert theory.primal_min(0.5, 1.5).objective > 0


def test_domain_errors():
    with pytest.raises(DomainError):
        theory.primal_min(2, 0.5)
    with pytest.raises(DomainError):
        theory.primal_min(-1, 2)
    with pytest.raises(DomainError):
        theory.dual_max(0.8, 2)
    with pytest.raises(DomainError):
        theory.dual_min(2, 0.9)


@settings(max_examples=150, deadline=None)
@given(st.floats(0.2, 6.0), st.floats(1.01, 8.0))
def test_primal_min_matches_stationarity_oracle(alpha, tau):
    assume(abs(alpha - 1.0) > 1e-3)
    res = theory.primal_min(alpha, tau)
    if res.regime == theory.ZERO_RISK:
        assert tau >= 1.0 / (1.0 - alpha) - 1e-12
        return
    eps, theta = stationary_oracle(alpha, tau)
    assert_allclose(res.objective, eps, rtol=1e-9, atol=1e-12)
    assert_allclose(res.multiplier, theta, rtol=1e-7, atol=1e-9)


@settings(max_examples=150, deadline=None)
@given(st.floats(0.2, 6.0), st.floats(1.01, 8.0))
def test_primal_max_matches_stationarity_oracle(alpha, tau):
    res = theory.primal_max(alpha, tau)
    eps, theta = stationary_oracle(alpha, tau, lower=False)
    assert_allclose(res.objective, eps, rtol=1e-9)
    assert_allclose(res.multiplier, theta, rtol=1e-7)


@settings(max_examples=150, deadline=None)
@given(st.floats(1.05, 6.0), st.floats(1.001, 6.0))
def test_dual_max_inverts_primal_min(alpha, kappa):
    eps0 = (alpha - 1) / 2
    res = theory.dual_max(alpha, kappa)
    kc = alpha / (alpha - 1)
    # independent inversion: the concentration whose minimal risk is kappa * eps0
    q = brentq(lambda t: theory.primal_min(alpha, t).objective - kappa * eps0, kc, 1e7, xtol=1e-14, rtol=1e-15)
    assert_allclose(res.objective, q, rtol=1e-9)
    # the optimum sits on the same stationary family
    assert_allclose(res.multiplier, theory.primal_min(alpha, res.objective).multiplier, rtol=1e-6, atol=1e-9)
    assert_allclose(theory.qw_of_phi(res.multiplier, alpha, kappa), res.objective, rtol=1e-7)


@settings(max_examples=150, deadline=None)
@given(st.floats(1.05, 6.0), st.floats(1.001, 6.0))
def test_dual_min_inverts_primal(alpha, kappa):
    eps0 = (alpha - 1) / 2
    kc = alpha / (alpha - 1)
    assume(abs(kappa - kc) > 1e-6)
    res = theory.dual_min(alpha, kappa)
    if kappa < kc:
        f, partner = (lambda t: theory.primal_min(alpha, t).objective - kappa * eps0), theory.primal_min
        q = brentq(f, 1.0 + 1e-15, kc, xtol=1e-15, rtol=1e-15)
    else:
        f, partner = (lambda t: theory.primal_max(alpha, t).objective - kappa * eps0), theory.primal_max
        q = brentq(f, 1.0 + 1e-15, 1e7, xtol=1e-15, rtol=1e-15)
    assert_allclose(res.objective, q, rtol=1e-8)
    assert_allclose(res.multiplier, partner(alpha, res.objective).multiplier, rtol=1e-5)


def test_dual_max_near_critical_kappa_is_continuous():
    alpha = 2.0
    vals = [theory.dual_max(alpha, 2.0 + d) for d in (-1e-3, -1e-5, 0.0, 1e-5, 1e-3)]
    mults = [v.multiplier for v in vals]
    assert all(math.isfinite(m) for m in mults)
    assert max(mults) - min(mults) < 1e-2
    assert_allclose(vals[2].multiplier, 1.0 / 6.0, rtol=1e-12)


def test_qw_of_phi_limits():
    assert_allclose(theory.qw_of_phi(0.0, 2.0, 1.0), 2.0, rtol=1e-14)
    assert_allclose(theory.qw_of_phi(1e-9, 2.0, 1.0), 2.0, rtol=1e-7)


def test_inequality_kkt_cases():
    # alpha = 3: q_w of the budget-only optimum is 1.5
    ge = theory.primal_min_inequality(3, 2, "at_least")
    le = theory.primal_min_inequality(3, 2, "at_most")
    assert ge.regime == theory.ACTIVE and abs(ge.objective - (7 - 2 * math.sqrt(6)) / 2) < 1e-14
    assert le.regime == theory.SLACK and le.objective == 1.0
    assert theory.primal_min_inequality(3, 1.2, "at_least").regime == theory.SLACK
    assert theory.primal_min_inequality(3, 1.2, "at_most").regime == theory.ACTIVE
    assert theory.primal_min_inequality(0.5, 1.5, "at_least").regime == theory.ZERO_RISK
    assert theory.primal_min_inequality(0.5, 1.5, "at_most").regime == theory.ACTIVE
    assert theory.primal_min_inequality(0.5, 3.0, "at_most").regime == theory.ZERO_RISK


def test_inequality_literal_tables_swap_the_cases():
    lit_ge = theory.primal_min_inequality(3, 2, "at_least", "paper_literal")
    lit_le = theory.primal_min_inequality(3, 2, "at_most", "paper_literal")
    assert lit_ge.objective == 1.0
    assert abs(lit_le.objective - 1.0505102572168) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(0.2, 6.0), st.floats(1.0, 8.0), st.sampled_from(["at_least", "at_most"]))
def test_kkt_value_bounds(alpha, tau, direction):
    res = theory.primal_min_inequality(alpha, tau, direction)
    eq = theory.primal_min(alpha, tau).objective
    # relaxing the equality can only lower the minimum
    assert res.objective <= eq + 1e-12
    if alpha > 1:
        assert res.objective >= (alpha - 1) / 2 - 1e-12


@pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("tau", [1.2, 2.0, 4.0])
def test_roundtrip(alpha, tau):
    rt = theory.primal_dual_roundtrip(alpha, tau)
    assert rt.discrepancy <= 1e-12 * tau
    expect = "dual_max" if tau >= alpha / (alpha - 1) else "dual_min"
    assert rt.min_side_dual == expect


def test_dual_max_cannot_return_tau_below_budget_only_point():
    # every maximal concentration is at least alpha / (alpha - 1)
    for kappa in (1.0, 1.01, 1.5, 3.0):
        assert theory.dual_max(1.5, kappa).objective >= 3.0 - 1e-12
    kappa = theory.kappa_for_tau(1.5, 1.2)
    assert abs(theory.dual_max(1.5, kappa).objective - 1.2) > 1


def test_problem_dataclasses():
    assert theory.PrimalProblem(2, 2).solve().objective == 0.5
    assert theory.PrimalProblem(3, 2, constraint_kind=theory.ConstraintKind.AT_MOST).solve().regime == theory.SLACK
    assert theory.DualProblem(2, 1.5).epsilon0 == 0.5
    assert abs(theory.DualProblem(2, 1.5, "minimize").solve().objective - 1.050510) < 1e-6
    with pytest.raises(DomainError):
        theory.DualProblem(1.0, 2.0)
