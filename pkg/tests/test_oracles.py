import numpy as np
import pytest
from numpy.testing import assert_allclose

from rmt_portfolio import finite_solver as fs
from rmt_portfolio.errors import DomainError
from rmt_portfolio.market_sim import SpectralDecomposition
from rmt_portfolio.oracles import brute_force_extrema, steepest_descent_oracle

from conftest import dense


def test_brute_force_identity():
    lo, hi = brute_force_extrema(np.eye(3), 2.0)
    assert_allclose([lo, hi], [1.0, 1.0], atol=1e-12)


def test_brute_force_diag123_vs_solver():
    J = np.diag([1.0, 2.0, 3.0])
    dec = SpectralDecomposition.from_matrix(J)
    lo, hi = brute_force_extrema(J, 2.0)
    assert_allclose(lo, fs.solve_primal(dec, 2.0, "minimize").risk_per_asset, atol=1e-6)
    assert_allclose(hi, fs.solve_primal(dec, 2.0, "maximize").risk_per_asset, atol=1e-6)


def test_brute_force_uniform_and_errors():
    J = np.diag([1.0, 2.0, 3.0])
    assert brute_force_extrema(J, 1.0) == (1.0, 1.0)
    with pytest.raises(DomainError):
        brute_force_extrema(np.eye(4), 2.0)
    with pytest.raises(DomainError):
        brute_force_extrema(J, 2.0, grid=100)


def test_descent_diag13():
    J = np.diag([1.0, 3.0])
    rep = steepest_descent_oracle(J, fs.ConstraintSpec("concentration_eq", 2.0), starts=10)
    assert abs(rep.risk_per_asset - 1.0) <= 1e-4
    assert rep.converged


def test_descent_uniform_shortcut():
    rep = steepest_descent_oracle(np.eye(5), fs.ConstraintSpec("concentration_eq", 1.0))
    assert_allclose(rep.weights, np.ones(5))
    assert rep.iterations == 0


@pytest.mark.parametrize("sense", ["minimize", "maximize"])
def test_descent_matches_solver_primal(dec50, sense):
    rep = steepest_descent_oracle(dense(dec50), fs.ConstraintSpec("concentration_eq", 2.0), starts=4, sense=sense)
    assert abs(rep.risk_per_asset - fs.solve_primal(dec50, 2.0, sense).risk_per_asset) <= 1e-4
    assert abs(rep.concentration - 2.0) < 1e-9
    assert abs(rep.residuals["budget"]) < 1e-9


@pytest.mark.parametrize("sense", ["minimize", "maximize"])
def test_descent_matches_solver_dual(dec50, sense):
    spec = fs.ConstraintSpec.risk(1.5, 2.0)
    rep = steepest_descent_oracle(dense(dec50), spec, starts=4, sense=sense)
    ref = fs.solve_dual(dec50, 1.5, sense, alpha=2.0).concentration
    assert abs(rep.concentration - ref) <= 1e-4 * ref
    assert abs(rep.risk_per_asset - 0.75) < 1e-9


def test_descent_rejects_inequalities_and_impossible_targets():
    with pytest.raises(DomainError):
        steepest_descent_oracle(np.eye(3), fs.ConstraintSpec("concentration_ge", 2.0))
    # risk target below the budget-only minimum of J = 4 I (which is 2)
    with pytest.raises(DomainError):
        steepest_descent_oracle(4 * np.eye(3), fs.ConstraintSpec.risk(1.0, 2.0))


def test_descent_warns_without_convergence():
    J = np.diag([1.0, 2.0, 5.0, 9.0])
    with pytest.warns(RuntimeWarning):
        rep = steepest_descent_oracle(J, fs.ConstraintSpec("concentration_eq", 2.0), starts=1, max_iters=2)
    assert not rep.converged
