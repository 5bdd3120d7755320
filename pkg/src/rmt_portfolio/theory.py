"""Closed-form large-N extrema of risk and concentration under budget constraints.

Risk per asset is ``w^T J w / (2N)``, concentration ``q_w = |w|^2 / N`` and the
budget ``sum(w) = N``. The primal problems fix ``q_w = tau``; the dual problems
fix the risk at ``kappa * eps0`` with ``eps0 = (alpha - 1) / 2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

from . import rmt_core
from .errors import DegeneracyError, DivergenceError, DomainError


class Sense(str, Enum):
    MINIMIZE = "minimize"
    MAXIMIZE = "maximize"


class Direction(str, Enum):
    AT_LEAST = "at_least"
    AT_MOST = "at_most"


class InequalityMode(str, Enum):
    KKT = "kkt"
    PAPER_LITERAL = "paper_literal"


class ConstraintKind(str, Enum):
    EQUALITY = "equality"
    AT_LEAST = "at_least"
    AT_MOST = "at_most"


# Regime labels carried by TheoryResult.regime.
INTERIOR = "interior"
ZERO_RISK = "zero_risk"
UNIFORM = "uniform"
BUDGET_ONLY = "budget_only"
SLACK = "slack"
ACTIVE = "active"


@dataclass(frozen=True)
class PrimalProblem:
    alpha: float
    tau: float
    sense: Sense = Sense.MINIMIZE
    constraint_kind: ConstraintKind = ConstraintKind.EQUALITY

    def __post_init__(self):
        _check_alpha(self.alpha)
        _check_tau(self.tau)

    def solve(self, mode: InequalityMode = InequalityMode.KKT) -> "TheoryResult":
        if self.constraint_kind is ConstraintKind.EQUALITY:
            fn = primal_min if self.sense is Sense.MINIMIZE else primal_max
            return fn(self.alpha, self.tau)
        if self.sense is not Sense.MINIMIZE:
            raise DomainError("inequality concentration constraints are only defined for minimisation")
        return primal_min_inequality(self.alpha, self.tau, Direction(self.constraint_kind.value), mode)


@dataclass(frozen=True)
class DualProblem:
    alpha: float
    kappa: float
    sense: Sense = Sense.MAXIMIZE

    def __post_init__(self):
        _check_dual(self.alpha, self.kappa)

    @property
    def epsilon0(self) -> float:
        return (self.alpha - 1.0) / 2.0

    def solve(self) -> "TheoryResult":
        fn = dual_max if self.sense is Sense.MAXIMIZE else dual_min
        return fn(self.alpha, self.kappa)


@dataclass(frozen=True)
class TheoryResult:
    """Optimal value, optimal multiplier and a regime label.

    ``multiplier`` is ``+/-inf`` when the optimum is the uniform portfolio and the
    multiplier formula diverges.
    """

    objective: float
    multiplier: float
    regime: str

    @property
    def multiplier_is_infinite(self) -> bool:
        return math.isinf(self.multiplier)

    def as_dict(self) -> dict:
        mult = self.multiplier
        return {
            "objective": self.objective,
            "multiplier": None if math.isinf(mult) else mult,
            "multiplier_infinite": math.isinf(mult),
            "regime": self.regime,
        }


class BudgetOnly(NamedTuple):
    epsilon: float
    q_w: float


def _check_alpha(alpha):
    if not (alpha > 0 and math.isfinite(alpha)):
        raise DomainError(f"alpha must be positive, got {alpha!r}")


def _check_tau(tau):
    if not (tau >= 1 and math.isfinite(tau)):
        raise DomainError(f"tau must be >= 1, got {tau!r}")


def _check_dual(alpha, kappa):
    if not (alpha > 1 and math.isfinite(alpha)):
        raise DomainError(f"dual problems need alpha > 1 (eps0 >= 0), got {alpha!r}")
    if not (kappa >= 1 and math.isfinite(kappa)):
        raise DomainError(f"kappa must be >= 1, got {kappa!r}")


def epsilon_of_theta(theta: float, alpha: float, tau: float) -> float:
    """Risk per asset along the stationary family, ``(1/S(theta) + tau theta) / 2``."""
    return 0.5 * (1.0 / rmt_core.stieltjes(theta, alpha) + tau * theta)


def _eps_equality(alpha, tau, sign):
    # (alpha tau + tau - 1 -/+ 2 sqrt(alpha tau (tau - 1))) / 2 written as a square
    return 0.5 * (math.sqrt(alpha * tau) + sign * math.sqrt(tau - 1.0)) ** 2


def _theta_equality(alpha, tau, sign):
    if tau == 1.0:
        return sign * math.inf
    return 1.0 + alpha + sign * (2.0 * tau - 1.0) * math.sqrt(alpha / (tau * (tau - 1.0)))


def primal_min(alpha: float, tau: float) -> TheoryResult:
    """Minimal risk per asset at concentration ``tau``."""
    _check_alpha(alpha)
    _check_tau(tau)
    if tau == 1.0:
        return TheoryResult(alpha / 2.0, -math.inf, UNIFORM)
    if alpha > 1.0 - 1.0 / tau:
        return TheoryResult(_eps_equality(alpha, tau, -1), _theta_equality(alpha, tau, -1), INTERIOR)
    return TheoryResult(0.0, 0.0, ZERO_RISK)


def primal_max(alpha: float, tau: float) -> TheoryResult:
    """Maximal risk per asset at concentration ``tau``."""
    _check_alpha(alpha)
    _check_tau(tau)
    if tau == 1.0:
        return TheoryResult(alpha / 2.0, math.inf, UNIFORM)
    return TheoryResult(_eps_equality(alpha, tau, 1), _theta_equality(alpha, tau, 1), INTERIOR)


def qw_of_phi(phi: float, alpha: float, kappa: float) -> float:
    """Concentration of the stationary portfolio at dual multiplier ``phi``.

    Equal to ``-(1/S(phi) - 2 kappa eps0) / phi``. The budget-only part
    ``((alpha - 1) - 1/S(phi)) / phi`` is rationalised so that ``phi -> 0`` is smooth;
    the remaining ``(kappa - 1)(alpha - 1) / phi`` diverges at zero unless ``kappa == 1``.
    """
    _check_dual(alpha, kappa)
    phi = float(phi)
    if phi == 0.0:
        if kappa != 1.0:
            raise DivergenceError("q_w(phi) diverges at phi = 0 for kappa > 1")
        s0 = rmt_core.stieltjes(0.0, alpha)
        return rmt_core.stieltjes_derivative(0.0, alpha) / (s0 * s0)
    sign, disc = rmt_core._branch(phi, alpha)
    if sign < 0:
        budget_part = 2.0 * alpha / (alpha - 1.0 + phi + disc)
    else:
        budget_part = (alpha - 1.0 + phi + disc) / (2.0 * phi)
    return (kappa - 1.0) * (alpha - 1.0) / phi + budget_part


def _kappa_critical(alpha):
    return alpha / (alpha - 1.0)


def _phi_ratio(alpha, kappa, sign):
    r = math.sqrt(alpha * kappa * (kappa - 1.0))
    num = (kappa + sign * r) * (kappa - 1.0 + sign * r)
    den = (kappa - _kappa_critical(alpha)) * (kappa + 1.0 / (alpha - 1.0))
    return num / den


def dual_max(alpha: float, kappa: float) -> TheoryResult:
    """Maximal concentration at risk ``kappa * eps0``."""
    _check_dual(alpha, kappa)
    q = (math.sqrt(alpha * kappa) + math.sqrt(kappa - 1.0)) ** 2 / (alpha - 1.0)
    if kappa == 1.0:
        return TheoryResult(q, 0.0, BUDGET_ONLY)
    kc = _kappa_critical(alpha)
    if abs(kappa - kc) > 1e-4 * kc:
        phi = _phi_ratio(alpha, kappa, -1)
    else:
        # The ratio is 0/0 here; the optimum coincides with the min-risk multiplier at tau = q.
        phi = _theta_equality(alpha, q, -1)
    return TheoryResult(q, phi, INTERIOR)


def dual_min(alpha: float, kappa: float) -> TheoryResult:
    """Minimal concentration at risk ``kappa * eps0``.

    At ``kappa = alpha / (alpha - 1)`` the uniform portfolio meets the risk target and
    the multiplier is reported as infinite.
    """
    _check_dual(alpha, kappa)
    q = (math.sqrt(alpha * kappa) - math.sqrt(kappa - 1.0)) ** 2 / (alpha - 1.0)
    if kappa == 1.0:
        return TheoryResult(q, 0.0, BUDGET_ONLY)
    kc = _kappa_critical(alpha)
    if abs(kappa - kc) <= 1e-9 * kc:
        return TheoryResult(1.0, math.inf, UNIFORM)
    return TheoryResult(q, _phi_ratio(alpha, kappa, 1), INTERIOR)


def budget_only(alpha: float) -> BudgetOnly:
    """Risk and concentration with only the budget imposed, via the theta -> 0 limits."""
    _check_alpha(alpha)
    if alpha <= 1.0:
        raise DegeneracyError(f"optimum is not unique for alpha={alpha!r} <= 1")
    s0 = rmt_core.stieltjes(0.0, alpha)
    ds0 = rmt_core.stieltjes_derivative(0.0, alpha)
    return BudgetOnly(1.0 / (2.0 * s0), ds0 / (s0 * s0))


def primal_min_inequality(
    alpha: float,
    tau: float,
    direction: Direction | str,
    mode: InequalityMode | str = InequalityMode.KKT,
) -> TheoryResult:
    """Minimal risk with ``q_w >= tau`` (``at_least``) or ``q_w <= tau`` (``at_most``).

    ``kkt`` mode checks whether the concentration-free optimum already satisfies the
    inequality and otherwise falls back to the equality solution. ``paper_literal``
    returns the published piecewise tables, which pair the two directions the other
    way round.
    """
    _check_alpha(alpha)
    _check_tau(tau)
    direction = Direction(direction)
    mode = InequalityMode(mode)
    if mode is InequalityMode.PAPER_LITERAL:
        return _inequality_literal(alpha, tau, direction)

    equality = primal_min(alpha, tau)
    active = TheoryResult(equality.objective, equality.multiplier, ACTIVE)
    if alpha < 1.0:
        # zero-risk portfolios exist for every q_w >= 1 / (1 - alpha)
        q_zero = 1.0 / (1.0 - alpha)
        feasible = direction is Direction.AT_LEAST or q_zero <= tau
        return TheoryResult(0.0, 0.0, ZERO_RISK) if feasible else active
    q_free = math.inf if alpha == 1.0 else alpha / (alpha - 1.0)
    if direction is Direction.AT_LEAST:
        feasible = q_free >= tau
    else:
        feasible = q_free <= tau
    return TheoryResult((alpha - 1.0) / 2.0, 0.0, SLACK) if feasible else active


def _inequality_literal(alpha, tau, direction):
    upper = math.inf if tau == 1.0 else tau / (tau - 1.0)
    interior = TheoryResult(_eps_equality(alpha, tau, -1), _theta_equality(alpha, tau, -1), ACTIVE)
    if direction is Direction.AT_LEAST:
        if alpha <= (tau - 1.0) / tau:
            return TheoryResult(0.0, 0.0, ZERO_RISK)
        if alpha < upper:
            return interior
        return TheoryResult((alpha - 1.0) / 2.0, 0.0, SLACK)
    if alpha < 1.0:
        return TheoryResult(0.0, 0.0, ZERO_RISK)
    if alpha <= upper:
        return TheoryResult((alpha - 1.0) / 2.0, 0.0, SLACK)
    return interior


@dataclass(frozen=True)
class RoundtripResult:
    """Primal -> dual -> primal check for both extremum pairs.

    ``min_side_dual`` names the dual problem whose optimum reproduces ``tau`` on the
    min-risk side: the maximal concentration when ``tau >= alpha / (alpha - 1)`` and
    the (below-bulk) minimal concentration otherwise.
    """

    kappa: float
    recovered_epsilon: float
    min_side_dual: str
    min_side_concentration: float
    kappa_max_side: float
    recovered_epsilon_max: float
    max_side_concentration: float
    discrepancy: float


def kappa_for_tau(alpha: float, tau: float, sense: Sense | str = Sense.MINIMIZE) -> float:
    """Risk coefficient whose target risk equals the primal extremum at ``tau``."""
    _check_tau(tau)
    if not alpha > 1:
        raise DomainError("kappa is only defined for alpha > 1")
    sign = -1 if Sense(sense) is Sense.MINIMIZE else 1
    return (alpha * tau + tau - 1.0 + sign * 2.0 * math.sqrt(alpha * tau * (tau - 1.0))) / (alpha - 1.0)


def primal_dual_roundtrip(alpha: float, tau: float, tol: float = 1e-9) -> RoundtripResult:
    """Map ``tau`` to ``kappa``, solve the dual and check it returns ``tau`` and the primal risk."""
    _check_tau(tau)
    _check_dual(alpha, 1.0)
    eps0 = (alpha - 1.0) / 2.0

    kappa = max(kappa_for_tau(alpha, tau, Sense.MINIMIZE), 1.0)
    if tau >= _kappa_critical(alpha):
        min_side_dual, dual = "dual_max", dual_max(alpha, kappa)
    else:
        min_side_dual, dual = "dual_min", dual_min(alpha, kappa)
    eps_min = kappa * eps0

    kappa_hi = kappa_for_tau(alpha, tau, Sense.MAXIMIZE)
    dual_hi = dual_min(alpha, kappa_hi)
    eps_max = kappa_hi * eps0

    discrepancy = max(
        abs(dual.objective - tau),
        abs(dual_hi.objective - tau),
        abs(eps_min - primal_min(alpha, tau).objective),
        abs(eps_max - primal_max(alpha, tau).objective),
    )
    if discrepancy > tol * max(1.0, tau):
        raise AssertionError(f"primal-dual roundtrip failed: discrepancy {discrepancy:.3e}")
    return RoundtripResult(
        kappa, eps_min, min_side_dual, dual.objective, kappa_hi, eps_max, dual_hi.objective, discrepancy
    )
