"""Exact finite-N solutions of the budget + concentration / budget + risk problems.

Every stationary portfolio has the form ``w(theta) = (J - theta I)^{-1} e / S_N(theta)``.
In the eigenbasis of ``J`` each probe costs O(N), so the constraint is solved as a
monotone one-dimensional root problem in the multiplier.

On ``(-inf, mu_1)``, where ``mu_1`` is the first zero of ``S_N`` (it lies between the two
smallest distinct eigenvalues), the concentration ``q(theta) = S_N' / S_N^2`` rises from
1 to infinity; the pole of ``S_N`` at ``lambda_1`` is removable for ``w``. This family
holds every global risk minimiser. Maximisers are the mirror image and are handled by
reflecting the spectrum. A degenerate lowest eigenvalue leaves ``(lambda_1, mu_1)``
empty; such cases get an explicit eigenspace construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .errors import ConvergenceError, DegeneracyError, DomainError, InfeasibleError
from .market_sim import SpectralDecomposition
from .theory import Direction, Sense

MAX_EXPANSIONS = 200
MAX_BISECTIONS = 200
# Relative widths: eigenvalue clustering, pole avoidance.
CLUSTER_TOL = 1e-9
GUARD = 1e-12


class Branch(str, Enum):
    BELOW_BULK = "below_bulk"
    ABOVE_BULK = "above_bulk"
    INTERIOR_GAP = "interior_gap"
    DEGENERATE_ZERO_RISK = "degenerate_zero_risk"
    DEGENERATE_CLUSTER = "degenerate_cluster"
    UNIFORM = "uniform"
    BUDGET_ONLY = "budget_only"


class ConstraintKind(str, Enum):
    CONCENTRATION_EQ = "concentration_eq"
    CONCENTRATION_GE = "concentration_ge"
    CONCENTRATION_LE = "concentration_le"
    RISK_EQ = "risk_eq"


@dataclass(frozen=True)
class ConstraintSpec:
    """Second constraint next to the budget: concentration ``tau`` or risk ``kappa * eps0``."""

    kind: ConstraintKind
    level: float
    epsilon0: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ConstraintKind(self.kind))
        if not self.level >= 1:
            raise DomainError(f"constraint level must be >= 1, got {self.level!r}")
        if self.kind is ConstraintKind.RISK_EQ and not (self.epsilon0 is not None and self.epsilon0 > 0):
            raise DomainError("risk_eq needs epsilon0 = (alpha - 1) / 2 > 0")

    @classmethod
    def risk(cls, kappa: float, alpha: float) -> "ConstraintSpec":
        if not alpha > 1:
            raise DomainError("risk constraints need alpha > 1")
        return cls(ConstraintKind.RISK_EQ, kappa, (alpha - 1.0) / 2.0)


@dataclass(frozen=True, eq=False)
class Portfolio:
    weights: np.ndarray

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def budget_residual(self) -> float:
        return budget_residual(self)

    @property
    def concentration(self) -> float:
        return concentration(self)


@dataclass(eq=False)
class SolveReport:
    portfolio: Portfolio
    multiplier: float
    budget_multiplier: float
    risk_per_asset: float
    concentration: float
    branch: Optional[Branch]
    iterations: int
    residuals: dict = field(default_factory=dict)
    kkt_case: Optional[str] = None
    converged: bool = True

    @property
    def weights(self) -> np.ndarray:
        return self.portfolio.weights

    def as_dict(self, include_weights: bool = False) -> dict:
        out = {
            "risk_per_asset": self.risk_per_asset,
            "concentration": self.concentration,
            "multiplier": _finite_or_none(self.multiplier),
            "multiplier_infinite": bool(math.isinf(self.multiplier)),
            "budget_multiplier": _finite_or_none(self.budget_multiplier),
            "branch": None if self.branch is None else Branch(self.branch).value,
            "iterations": self.iterations,
            "converged": self.converged,
            "kkt_case": self.kkt_case,
            "residuals": {k: float(v) for k, v in self.residuals.items()},
        }
        if include_weights:
            out["weights"] = [float(x) for x in self.weights]
        return out


def _finite_or_none(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _as_weights(w) -> np.ndarray:
    return np.asarray(w.weights if isinstance(w, Portfolio) else w, dtype=float)


def risk_per_asset(w, dec: SpectralDecomposition) -> float:
    """``w^T J w / (2N)`` evaluated as ``sum_k lambda_k (v_k . w)^2 / (2N)``."""
    w = _as_weights(w)
    if w.shape[0] != dec.size:
        raise DomainError("portfolio and decomposition sizes differ")
    c = dec.eigenvectors.T @ w
    return float(np.dot(dec.eigenvalues, c * c) / (2.0 * w.shape[0]))


def concentration(w) -> float:
    w = _as_weights(w)
    return float(np.dot(w, w) / w.shape[0])


def budget_residual(w) -> float:
    w = _as_weights(w)
    return float(w.sum() - w.shape[0])


# --------------------------------------------------------------------------------------
# spectral machinery


class _Spectrum:
    """Clustered spectrum in ascending order with squared overlaps as weights.

    ``reflected`` spectra carry ``-lambda`` reversed, turning maximisation into
    minimisation; only ``lam``/``w2`` change, the eigenvectors stay with their indices.
    """

    def __init__(self, dec: SpectralDecomposition, reflected: bool = False):
        lam = np.asarray(dec.eigenvalues, dtype=float)
        n = lam.shape[0]
        scale = max(1.0, float(np.max(np.abs(lam))) if n else 1.0)
        self.scale = scale
        snapped = lam.copy()
        labels = np.zeros(n, dtype=int)
        start = 0
        for k in range(1, n + 1):
            if k == n or lam[k] - lam[k - 1] > CLUSTER_TOL * scale:
                snapped[start:k] = lam[start:k].mean()
                labels[start:k] = labels[start - 1] + 1 if start else 0
                start = k
        order = np.arange(n)
        if reflected:
            order = order[::-1]
            snapped = -snapped[::-1]
            labels = labels.max() - labels[::-1]
        self.order = order
        self.lam = snapped
        self.labels = labels
        self.u = np.asarray(dec.overlaps, dtype=float)[order]
        self.w2 = self.u * self.u
        self.n = n
        self.reflected = reflected
        self.guard = GUARD * scale

    # cluster bookkeeping -----------------------------------------------------------
    def cluster(self, label: int = 0) -> np.ndarray:
        return np.flatnonzero(self.labels == label)

    def cluster_value(self, label: int = 0) -> float:
        return float(self.lam[self.cluster(label)[0]])

    @property
    def n_clusters(self) -> int:
        return int(self.labels[-1]) + 1

    # curve evaluations ---------------------------------------------------------------
    def sums(self, theta: float):
        g = 1.0 / (self.lam - theta)
        wg = self.w2 * g
        s = wg.sum() / self.n
        s1 = np.dot(wg, g) / self.n
        sl = np.dot(wg * g, self.lam) / self.n
        return s, s1, sl

    def q(self, theta: float) -> float:
        s, s1, _ = self.sums(theta)
        return s1 / (s * s)

    def risk(self, theta: float) -> float:
        """Risk per asset of w(theta) measured with this (possibly reflected) spectrum."""
        s, _, sl = self.sums(theta)
        return sl / (2.0 * s * s)

    def stieltjes(self, theta: float) -> float:
        return self.sums(theta)[0]

    def secular_root(self) -> float:
        """Zero of S_N between the two lowest distinct eigenvalues."""
        a, b = self.cluster_value(0), self.cluster_value(1)
        pad = max(self.guard, 1e-15 * (b - a))
        theta, _ = _bisect(self.stieltjes, a + pad, b - pad, 0.0)
        return theta


def _bisect(f: Callable[[float], float], lo: float, hi: float, target: float, ftol: float = 0.0):
    """Bisection for increasing ``f`` with ``f(lo) <= target <= f(hi)``; runs to float resolution."""
    it = 0
    for it in range(1, MAX_BISECTIONS + 1):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        val = f(mid)
        if abs(val - target) <= ftol:
            return mid, it
        if val < target:
            lo = mid
        else:
            hi = mid
    f_lo, f_hi = f(lo), f(hi)
    return (lo if abs(f_lo - target) <= abs(f_hi - target) else hi), it


@dataclass
class _CurvePoint:
    theta: float
    branch: str  # "below" | "gap" | "hard"
    iterations: int


def _search_curve(
    spec: _Spectrum,
    f: Callable[[float], float],
    target: float,
    left: Optional[float] = None,
    right: Optional[float] = None,
    ftol: float = 0.0,
) -> _CurvePoint:
    """Find ``theta`` with ``f(theta) == target`` for ``f`` increasing along the curve.

    ``left``/``right`` restrict the search; without ``right`` the search may cross the
    lowest eigenvalue into the spectral gap. Returns ``branch="hard"`` when the target
    lies beyond what the curve reaches below a degenerate lowest eigenvalue.
    """
    lam1 = spec.cluster_value(0)
    evals = 0

    def expand_left(hi_val):
        nonlocal evals
        if left is not None:
            return left
        offset = 1.0
        for _ in range(MAX_EXPANSIONS):
            lo = min(lam1, hi_val) - offset
            evals += 1
            if f(lo) <= target:
                return lo
            offset *= 2.0
        raise ConvergenceError("could not bracket the multiplier from below", target=target)

    if right is not None:
        lo = expand_left(right)
        theta, it = _bisect(f, lo, right, target, ftol)
        return _CurvePoint(theta, "below", it + evals)

    # below the lowest eigenvalue
    delta = 1e-6 * spec.scale
    hi = lam1 - delta
    while left is None or hi > left:
        evals += 1
        if f(hi) >= target:
            lo = expand_left(hi)
            theta, it = _bisect(f, lo, hi, target, ftol)
            return _CurvePoint(theta, "below", it + evals)
        if delta <= spec.guard:
            break
        delta = max(delta / 2.0, spec.guard)
        hi = lam1 - delta

    first = spec.cluster(0)
    if first.size > 1 or spec.w2[first].sum() <= 1e-12 * spec.n or spec.n_clusters < 2:
        return _CurvePoint(lam1, "hard", evals)

    # inside the gap (lambda_1, mu_1): f continues upward through the removable pole
    mu1 = spec.secular_root()
    lo = lam1 + spec.guard
    if f(lo) >= target:
        return _CurvePoint(lo, "gap", evals)
    width = mu1 - lam1
    delta = 0.5 * width
    for _ in range(MAX_EXPANSIONS):
        hi = mu1 - delta
        evals += 1
        if f(hi) >= target:
            theta, it = _bisect(f, lo, hi, target, ftol)
            return _CurvePoint(theta, "gap", it + evals)
        delta *= 0.5
        if delta < 1e-15 * max(1.0, abs(mu1)):
            break
    raise ConvergenceError("target not reachable inside the spectral gap", target=target, mu1=mu1)


def _stationary_weights(dec: SpectralDecomposition, spec: _Spectrum, theta: float):
    """w(theta) and the budget multiplier, in original coordinates."""
    lam = spec.lam[np.argsort(spec.order)]
    if spec.reflected:
        lam, mult = -lam, -theta
    else:
        mult = theta
    coef = dec.overlaps / (lam - mult)
    s = np.dot(dec.overlaps, coef) / dec.size
    c = coef / s
    return dec.eigenvectors @ c, mult, 1.0 / s


def _cluster_weights(dec: SpectralDecomposition, spec: _Spectrum, tau: float):
    """Eigenspace construction when the concentration exceeds the curve's reach.

    With the lowest (reflected: highest) cluster C at multiplier ``lambda_C`` the
    stationarity condition forces either ``w`` inside C (nonzero overlap with ``e``)
    or, when ``e`` is orthogonal to C, the resolvent part plus a free component in C.
    """
    n = dec.size
    idx = spec.order[spec.cluster(0)]
    lam_c = float(np.mean(dec.eigenvalues[idx]))
    u_c = dec.overlaps[idx]
    wc = float(np.dot(u_c, u_c))
    c = np.zeros(n)
    if wc > 1e-12 * n:
        c[idx] = (n / wc) * u_c
        budget_mult = 0.0
    else:
        rest = np.setdiff1d(np.arange(n), idx)
        coef = dec.overlaps[rest] / (dec.eigenvalues[rest] - lam_c)
        s = np.dot(dec.overlaps[rest], coef) / n
        c[rest] = coef / s
        budget_mult = 1.0 / s
        u_c = np.zeros_like(u_c)
        wc = 0.0
    extra = n * tau - float(np.dot(c, c))
    if extra > 0:
        if idx.size < 2 and wc > 0:
            raise InfeasibleError("one-dimensional eigenspace cannot absorb the extra concentration")
        # direction inside the cluster orthogonal to its overlap with e
        j = int(np.argmin(np.abs(u_c)))
        z = -u_c * (u_c[j] / wc) if wc > 0 else np.zeros_like(u_c)
        z[j] += 1.0
        z /= np.linalg.norm(z)
        c[idx] += math.sqrt(extra) * z
    return dec.eigenvectors @ c, lam_c, budget_mult


def _polish(w: np.ndarray, tau: float) -> np.ndarray:
    """Re-impose both equality constraints exactly by rescaling the deviation from e."""
    n = w.shape[0]
    d = w - w.mean()
    norm = float(np.linalg.norm(d))
    if tau == 1.0 or norm == 0.0:
        return np.ones(n)
    return 1.0 + d * (math.sqrt(n * (tau - 1.0)) / norm)


def _null_tol(dec: SpectralDecomposition) -> float:
    return 1e-8 * max(1.0, float(dec.eigenvalues[-1]))


def _report(dec, w, theta, k, branch, iterations, internal_risk, **residuals) -> SolveReport:
    n = dec.size
    risk = risk_per_asset(w, dec)
    kkt = dec.eigenvectors @ ((dec.eigenvalues - theta) * (dec.eigenvectors.T @ w)) - k
    if math.isfinite(theta) and math.isfinite(k):
        residuals.setdefault("kkt", float(np.max(np.abs(kkt))))
    residuals["budget"] = budget_residual(w)
    residuals["risk_consistency"] = abs(internal_risk - risk) / max(1.0, abs(risk))
    return SolveReport(
        Portfolio(w), float(theta), float(k), risk, concentration(w), Branch(branch), iterations, residuals
    )


def _uniform_report(dec: SpectralDecomposition, sense_sign: int, **residuals) -> SolveReport:
    w = np.ones(dec.size)
    risk = risk_per_asset(w, dec)
    residuals["budget"] = 0.0
    return SolveReport(Portfolio(w), sense_sign * math.inf, math.nan, risk, 1.0, Branch.UNIFORM, 0, residuals)


# --------------------------------------------------------------------------------------
# primal problems


def solve_primal(dec: SpectralDecomposition, tau: float, sense: Sense | str = Sense.MINIMIZE) -> SolveReport:
    """Minimise or maximise the risk per asset subject to ``sum w = N`` and ``|w|^2 = N tau``."""
    sense = Sense(sense)
    if not tau >= 1:
        raise DomainError(f"tau must be >= 1, got {tau!r}")
    sign = -1 if sense is Sense.MINIMIZE else 1
    if tau == 1.0:
        return _uniform_report(dec, sign, concentration=0.0)
    spec = _Spectrum(dec, reflected=sense is Sense.MAXIMIZE)
    point = _search_curve(spec, spec.q, tau)

    if point.branch == "hard":
        w, theta, k = _cluster_weights(dec, spec, tau)
        lam_c = theta
        if abs(lam_c) <= _null_tol(dec):
            branch = Branch.DEGENERATE_ZERO_RISK
        else:
            branch = Branch.DEGENERATE_CLUSTER
        internal = risk_per_asset(w, dec)
    else:
        w, theta, k = _stationary_weights(dec, spec, point.theta)
        internal = -spec.risk(point.theta) if spec.reflected else spec.risk(point.theta)
        if point.branch == "gap":
            branch = Branch.INTERIOR_GAP
        else:
            branch = Branch.ABOVE_BULK if spec.reflected else Branch.BELOW_BULK
    rep = _report(dec, _polish(w, tau), theta, k, branch, point.iterations, internal)
    rep.residuals["concentration"] = rep.concentration - tau
    if abs(rep.residuals["concentration"]) > 1e-9 * max(1.0, tau):
        raise ConvergenceError("concentration constraint not met", residual=rep.residuals["concentration"])
    return rep


def solve_budget_only(dec: SpectralDecomposition) -> SolveReport:
    """Minimum-risk portfolio with only the budget, ``w = J^{-1} e / S_N(0)``."""
    shape = dec.shape
    if shape is not None and shape.num_periods is not None and shape.num_periods <= shape.num_assets:
        raise DegeneracyError("budget-only optimum needs p > N")
    if dec.eigenvalues[0] <= _null_tol(dec):
        raise DegeneracyError("covariance matrix is rank deficient")
    spec = _Spectrum(dec)
    w, theta, k = _stationary_weights(dec, spec, 0.0)
    return _report(dec, w, 0.0, k, Branch.BUDGET_ONLY, 0, spec.risk(0.0))


def solve_primal_inequality(
    dec: SpectralDecomposition, tau: float, direction: Direction | str
) -> SolveReport:
    """Minimal risk with ``q >= tau`` or ``q <= tau``, dispatched on feasibility.

    The concentration-free optimum (budget-only, or the zero-risk set when J is
    singular) is returned when it satisfies the inequality; otherwise the equality
    solution at ``q = tau`` is optimal.
    """
    direction = Direction(direction)
    if not tau >= 1:
        raise DomainError(f"tau must be >= 1, got {tau!r}")
    n = dec.size
    null = dec.eigenvalues <= _null_tol(dec)
    if np.any(null):
        w_null = float(np.sum(dec.overlaps[null] ** 2))
        q_zero = n / w_null if w_null > 1e-12 * n else math.inf
        dim = int(np.count_nonzero(null))
        if direction is Direction.AT_LEAST and math.isfinite(q_zero) and (dim >= 2 or q_zero >= tau):
            rep = solve_primal(dec, max(tau, q_zero) if dim >= 2 else q_zero)
            rep.kkt_case = "zero_risk"
            return rep
        if direction is Direction.AT_MOST and q_zero <= tau:
            rep = solve_primal(dec, q_zero)
            rep.kkt_case = "zero_risk"
            return rep
    else:
        free = solve_budget_only(dec)
        q_free = free.concentration
        ok = q_free >= tau if direction is Direction.AT_LEAST else q_free <= tau
        if ok:
            free.kkt_case = "slack"
            free.residuals["concentration_slack"] = q_free - tau
            return free
    rep = solve_primal(dec, tau)
    rep.kkt_case = "active"
    return rep


# --------------------------------------------------------------------------------------
# dual problems


def _alpha_of(dec: SpectralDecomposition, alpha: Optional[float]) -> float:
    if alpha is not None:
        return float(alpha)
    if dec.shape is None or dec.shape.num_periods is None:
        raise DomainError("alpha is required when the decomposition carries no market shape")
    return dec.shape.alpha


def solve_dual(
    dec: SpectralDecomposition,
    kappa: float,
    sense: Sense | str = Sense.MAXIMIZE,
    alpha: Optional[float] = None,
) -> SolveReport:
    """Extremise the concentration subject to ``sum w = N`` and risk ``kappa (alpha-1)/2``.

    ``kappa = 1`` returns the budget-only portfolio for both senses. Other values are
    handed to :func:`solve_dual_target` with the absolute risk target.
    """
    alpha = _alpha_of(dec, alpha)
    if not alpha > 1:
        raise DomainError(f"dual problems need alpha > 1, got {alpha!r}")
    if not kappa >= 1:
        raise DomainError(f"kappa must be >= 1, got {kappa!r}")
    if kappa == 1.0:
        # kappa = 1 names the unconstrained minimum itself, whatever its sample value
        rep = solve_budget_only(dec)
        rep.residuals["risk"] = 0.0
        return rep
    return solve_dual_target(dec, kappa * (alpha - 1.0) / 2.0, sense)


def solve_dual_target(
    dec: SpectralDecomposition, target: float, sense: Sense | str = Sense.MAXIMIZE
) -> SolveReport:
    """Extremise the concentration at an absolute risk per asset ``target``.

    ``sense=maximize`` searches ``phi`` in ``(0, mu_1)``; ``sense=minimize`` searches
    ``phi < 0`` when the target is below the uniform portfolio's risk and the mirrored
    curve above the spectrum otherwise. The dispatch uses this sample's own
    uniform-portfolio risk, so it is exact at finite N.
    """
    sense = Sense(sense)
    if dec.eigenvalues[0] <= _null_tol(dec):
        raise DegeneracyError("covariance matrix is rank deficient")
    spec = _Spectrum(dec)
    r0 = spec.risk(0.0)
    tol = 1e-12 * max(1.0, target)
    if target < r0 - tol:
        raise InfeasibleError(
            f"target risk {target:.6g} is below the budget-only minimum {r0:.6g} of this sample"
        )
    if target <= r0 + tol:
        rep = solve_budget_only(dec)
        rep.residuals["risk"] = rep.risk_per_asset - target
        return rep

    ftol = 1e-14 * target
    r_uniform = risk_per_asset(np.ones(dec.size), dec)
    if sense is Sense.MAXIMIZE:
        point = _search_curve(spec, spec.risk, target, left=0.0, ftol=ftol)
        spec_used = spec
        branch_below = Branch.BELOW_BULK
    elif abs(target - r_uniform) <= 1e-9 * max(1.0, target):
        rep = _uniform_report(dec, 1)
        rep.residuals["risk"] = rep.risk_per_asset - target
        return rep
    elif target < r_uniform:
        point = _search_curve(spec, lambda t: -spec.risk(t), -target, right=0.0, ftol=ftol)
        spec_used = spec
        branch_below = Branch.BELOW_BULK
    else:
        spec_used = _Spectrum(dec, reflected=True)
        point = _search_curve(spec_used, lambda t: -spec_used.risk(t), target, ftol=ftol)
        branch_below = Branch.ABOVE_BULK

    if point.branch == "hard":
        lam_c = spec_used.cluster_value(0)
        tau = 2.0 * target / abs(lam_c)
        w, phi, h = _cluster_weights(dec, spec_used, tau)
        branch = Branch.DEGENERATE_CLUSTER
        internal = risk_per_asset(w, dec)
    else:
        w, phi, h = _stationary_weights(dec, spec_used, point.theta)
        internal = -spec_used.risk(point.theta) if spec_used.reflected else spec_used.risk(point.theta)
        branch = Branch.INTERIOR_GAP if point.branch == "gap" else branch_below
    rep = _report(dec, w, phi, h, branch, point.iterations, internal)
    rep.residuals["risk"] = rep.risk_per_asset - target
    if abs(rep.residuals["risk"]) > 1e-9 * max(1.0, target):
        raise ConvergenceError("risk constraint not met", residual=rep.residuals["risk"])
    return rep


def branch_monotonicity(dec: SpectralDecomposition, probes: int = 64) -> bool:
    """Check that q is increasing below the spectrum and decreasing above it."""
    lam = dec.eigenvalues
    spec = _Spectrum(dec)
    span = max(1.0, float(lam[-1] - lam[0]))
    offsets = np.geomspace(1e-6 * span, 1e3 * span, probes)
    below = [spec.q(lam[0] - o) for o in offsets[::-1]]
    above = [spec.q(lam[-1] + o) for o in offsets]
    return bool(np.all(np.diff(below) > -1e-12 * np.abs(below[1:])) and
                np.all(np.diff(above) < 1e-12 * np.abs(above[1:])))
