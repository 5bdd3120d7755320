"""Independent cross-checks for the spectral solver.

Neither routine touches the eigen-decomposition machinery of ``finite_solver``: the
angle scan parameterises the feasible circle for N = 3 directly, and the descent
oracle walks the constraint manifold with plain matrix-vector products.
"""
from __future__ import annotations

import math
import warnings

import numpy as np

from .errors import DomainError
from .finite_solver import Branch, ConstraintKind, ConstraintSpec, Portfolio, SolveReport
from .market_sim import substream
from .theory import Sense


def _plane_basis(n: int) -> np.ndarray:
    """Orthonormal basis (columns) of the hyperplane orthogonal to the ones vector."""
    q, _ = np.linalg.qr(np.column_stack([np.ones(n), np.eye(n)[:, : n - 1]]))
    return q[:, 1:]


def brute_force_extrema(J, tau: float, grid: int = 20000) -> tuple[float, float]:
    """Minimum and maximum risk per asset on ``{sum w = 3, |w|^2 = 3 tau}`` for 3x3 ``J``.

    The feasible set is the circle ``e + R (cos t a + sin t b)``; the risk is a
    trigonometric polynomial of degree two in ``t``, scanned on ``grid`` points and
    refined with one Newton step per extremum.
    """
    J = np.asarray(J, dtype=float)
    if J.shape != (3, 3):
        raise DomainError("brute_force_extrema needs a 3x3 matrix")
    if grid < 10_000:
        raise DomainError("grid must be >= 10000")
    if not tau >= 1:
        raise DomainError("tau must be >= 1")
    e = np.ones(3)
    if tau == 1.0:
        r = float(e @ J @ e) / 6.0
        return r, r
    radius = math.sqrt(3.0 * (tau - 1.0))
    ab = _plane_basis(3) * radius
    a, b = ab[:, 0], ab[:, 1]
    # risk(t) * 6 = c0 + c1 cos t + s1 sin t + caa cos^2 t + cbb sin^2 t + 2 cab sin t cos t
    c0 = e @ J @ e
    c1, s1 = 2 * e @ J @ a, 2 * e @ J @ b
    caa, cbb, cab = a @ J @ a, b @ J @ b, a @ J @ b

    def f(t):
        ct, st = np.cos(t), np.sin(t)
        return (c0 + c1 * ct + s1 * st + caa * ct * ct + cbb * st * st + 2 * cab * st * ct) / 6.0

    def df(t):
        ct, st = np.cos(t), np.sin(t)
        return (-c1 * st + s1 * ct + (cbb - caa) * 2 * st * ct + 2 * cab * (ct * ct - st * st)) / 6.0

    def d2f(t):
        ct, st = np.cos(t), np.sin(t)
        return (-c1 * ct - s1 * st + 2 * (cbb - caa) * (ct * ct - st * st) - 8 * cab * st * ct) / 6.0

    t = np.linspace(0.0, 2.0 * np.pi, grid, endpoint=False)
    vals = f(t)
    out = []
    for idx in (int(np.argmin(vals)), int(np.argmax(vals))):
        t0 = t[idx]
        curv = d2f(t0)
        t1 = t0 - df(t0) / curv if curv != 0 else t0
        out.append(float(f(t1)) if abs(t1 - t0) < 2 * np.pi / grid else float(vals[idx]))
    lo, hi = out
    return lo, hi


def _risk(J, w):
    return float(w @ J @ w) / (2.0 * w.shape[0])


class _Manifold:
    """Feasible set written as ``w = c + T y`` with ``|y|^2 = r^2`` and ``b^T y = 0``.

    For the concentration sphere ``T = I``; for the risk ellipsoid ``T = L^{-T}`` with
    ``J = L L^T`` (Cholesky), which whitens the ellipsoid into a sphere around the
    budget-only portfolio. Either way the iteration runs on a sphere slice.
    """

    def __init__(self, J, spec: ConstraintSpec):
        n = J.shape[0]
        e = np.ones(n)
        if spec.kind is ConstraintKind.CONCENTRATION_EQ:
            self.center = e
            self.transform = np.eye(n)
            self.radius = math.sqrt(n * (spec.level - 1.0))
        elif spec.kind is ConstraintKind.RISK_EQ:
            try:
                chol = np.linalg.cholesky(J)
            except np.linalg.LinAlgError as exc:
                raise DomainError("risk-constrained descent needs a positive definite J") from exc
            x = np.linalg.solve(J, e)
            self.center = x * (n / x.sum())
            # risk(w_b + d) = risk(w_b) + d^T J d / (2N) for budget-preserving d
            gap = 2.0 * n * (spec.level * spec.epsilon0 - _risk(J, self.center))
            if gap < 0:
                raise DomainError("risk target below the budget-only minimum")
            self.transform = np.linalg.inv(chol).T
            self.radius = math.sqrt(gap)
        else:
            raise DomainError("descent oracle handles equality constraints only")
        b = self.transform.T @ e
        self.normal = b / np.linalg.norm(b)

    def point(self, y):
        return self.center + self.transform @ y

    def project(self, y):
        y = y - self.normal * float(self.normal @ y)
        ny = float(np.linalg.norm(y))
        return y * (self.radius / ny) if ny > 0 else y

    def tangent(self, y, g):
        g = g - self.normal * float(self.normal @ g)
        yy = float(y @ y)
        return g - y * (float(y @ g) / yy) if yy > 0 else g

    def random_point(self, rng):
        return self.project(rng.standard_normal(self.center.shape[0]))


def steepest_descent_oracle(
    J,
    constraints: ConstraintSpec,
    starts: int = 10,
    step: float | None = None,
    max_iters: int = 20000,
    sense: Sense | str = Sense.MINIMIZE,
    gtol: float = 1e-9,
    seed: int = 0,
) -> SolveReport:
    """Multi-start projected gradient descent (or ascent) on the constraint manifold.

    The objective is the risk per asset for concentration constraints and the
    concentration for risk constraints. Each iterate is re-projected onto the
    manifold; the best local optimum over ``starts`` random starts is returned.
    """
    J = np.asarray(J, dtype=float)
    n = J.shape[0]
    sense = Sense(sense)
    constraints = ConstraintSpec(constraints.kind, constraints.level, constraints.epsilon0)
    sign = 1.0 if sense is Sense.MINIMIZE else -1.0
    if constraints.kind is ConstraintKind.CONCENTRATION_EQ and constraints.level == 1.0:
        w = np.ones(n)
        return SolveReport(Portfolio(w), math.nan, math.nan, _risk(J, w), 1.0, Branch.UNIFORM, 0)

    risk_objective = constraints.kind is ConstraintKind.CONCENTRATION_EQ
    manifold = _Manifold(J, constraints)
    T = manifold.transform
    # Hessian of the objective in y coordinates, for a safe default step
    hess = T.T @ (J / n if risk_objective else 2.0 * np.eye(n) / n) @ T
    if step is None:
        step = 0.5 / float(np.linalg.norm(hess, 2))

    def objective(w):
        return _risk(J, w) if risk_objective else float(w @ w) / n

    def gradient(y):
        w = manifold.point(y)
        return T.T @ (J @ w / n if risk_objective else 2.0 * w / n)

    rng = substream(seed, 0)
    best, best_val, best_iters, all_converged = None, math.inf, 0, True
    for _ in range(max(1, starts)):
        y = manifold.random_point(rng)
        converged = False
        it = 0
        for it in range(1, max_iters + 1):
            g = manifold.tangent(y, sign * gradient(y))
            if float(np.linalg.norm(g)) * math.sqrt(n) <= gtol * max(1.0, abs(objective(manifold.point(y)))):
                converged = True
                break
            y = manifold.project(y - step * g)
        w = manifold.point(y)
        val = sign * objective(w)
        all_converged &= converged
        if val < best_val:
            best, best_val, best_iters = w, val, it
    if not all_converged:
        warnings.warn("steepest descent hit max_iters on at least one start", RuntimeWarning)
    residuals = {"budget": float(best.sum() - n)}
    return SolveReport(
        Portfolio(best), math.nan, math.nan, _risk(J, best), float(best @ best) / n,
        None, best_iters, residuals, converged=all_converged,
    )
