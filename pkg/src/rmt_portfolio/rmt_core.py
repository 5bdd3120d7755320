"""Marchenko-Pastur law for unit-variance Wishart matrices and its Stieltjes transform.

With ``alpha = p / N`` the limiting spectrum of ``J = X X^T / N`` has bulk edges
``(1 -/+ sqrt(alpha))**2`` and, for ``alpha < 1``, an atom of mass ``1 - alpha``
at zero. The resolvent average ``S(theta) = int rho(l) / (l - theta) dl`` is real
only outside the bulk and solves ``theta S^2 + (theta + 1 - alpha) S + 1 = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BranchError, DivergenceError, DomainError, SingularityError

#: Queries closer than this to a bulk edge are rejected rather than extrapolated.
EDGE_GUARD = 1e-12


@dataclass(frozen=True)
class MarketShape:
    """Problem geometry: ``num_assets`` N, ``num_periods`` p and ``alpha = p / N``.

    The asymptotic regime only needs ``alpha``; finite samples carry N and p too.
    """

    alpha: float
    num_assets: Optional[int] = None
    num_periods: Optional[int] = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha!r}")
        if self.num_assets is not None and self.num_periods is not None:
            if self.num_assets < 1 or self.num_periods < 1:
                raise DomainError("num_assets and num_periods must be positive")
            if self.alpha != self.num_periods / self.num_assets:
                raise DomainError("alpha must equal num_periods / num_assets")

    @classmethod
    def from_counts(cls, num_assets: int, num_periods: int) -> "MarketShape":
        if num_assets < 1 or num_periods < 1:
            raise DomainError("num_assets and num_periods must be positive")
        return cls(num_periods / num_assets, int(num_assets), int(num_periods))

    @classmethod
    def from_alpha(cls, num_assets: int, alpha: float) -> "MarketShape":
        """Finite shape with ``p = round(alpha * N)``; alpha is re-derived from the counts."""
        return cls.from_counts(num_assets, max(int(round(alpha * num_assets)), 1))


@dataclass(frozen=True)
class SpectralSupport:
    lambda_minus: float
    lambda_plus: float
    zero_mass: float


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not alpha > 0 or not math.isfinite(alpha):
        raise DomainError(f"alpha must be positive and finite, got {alpha!r}")
    return alpha


def _edges(alpha: float) -> tuple[float, float]:
    r = math.sqrt(alpha)
    return (1.0 - r) ** 2, (1.0 + r) ** 2


def mp_support(alpha: float) -> SpectralSupport:
    """Bulk edges and the mass of the atom at zero."""
    alpha = _check_alpha(alpha)
    lo, hi = _edges(alpha)
    return SpectralSupport(lo, hi, max(1.0 - alpha, 0.0))


def mp_density(lam, alpha: float):
    """Continuous part of the Marchenko-Pastur density.

    The atom at zero (``alpha < 1``) is never folded in; read it from
    :func:`mp_support`. Accepts scalars or arrays.
    """
    alpha = _check_alpha(alpha)
    lo, hi = _edges(alpha)
    lam_arr = np.asarray(lam, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        num = np.sqrt(np.maximum(hi - lam_arr, 0.0) * np.maximum(lam_arr - lo, 0.0))
        out = np.where(lam_arr > 0, num / (2.0 * np.pi * lam_arr), 0.0)
    out = np.where(np.isfinite(out), out, 0.0)
    return float(out) if out.ndim == 0 else out


def _branch(theta: float, alpha: float) -> tuple[int, float]:
    """Return (branch sign, discriminant root) for a real multiplier outside the bulk.

    Branch sign is -1 below the bulk and +1 above it.
    """
    theta = float(theta)
    if not math.isfinite(theta):
        raise DomainError(f"theta must be finite, got {theta!r}")
    lo, hi = _edges(alpha)
    if lo - EDGE_GUARD <= theta <= hi + EDGE_GUARD:
        raise BranchError(
            f"theta={theta!r} is inside the support [{lo:.12g}, {hi:.12g}] for alpha={alpha!r}"
        )
    # (1 + alpha - theta)^2 - 4 alpha factored through the edges keeps accuracy near them.
    disc = math.sqrt((lo - theta) * (hi - theta))
    return (-1 if theta < lo else 1), disc


def stieltjes(theta: float, alpha: float) -> float:
    """Closed-form Stieltjes transform of the Marchenko-Pastur law at real ``theta``.

    Each branch is evaluated in a rationalised form that avoids cancellation, so the
    ``theta -> 0`` limit ``1 / (alpha - 1)`` (``alpha > 1``) needs no special case.
    """
    alpha = _check_alpha(alpha)
    theta = float(theta)
    if theta == 0.0 and alpha <= 1.0:
        raise DivergenceError(f"S(0) diverges for alpha={alpha!r} <= 1")
    sign, disc = _branch(theta, alpha)
    b = alpha - 1.0 - theta
    if sign < 0:
        if b >= 0.0:
            return 2.0 / (b + disc)
        return (b - disc) / (2.0 * theta)
    return 2.0 / (b - disc)


def stieltjes_derivative(theta: float, alpha: float) -> float:
    """dS/dtheta by implicit differentiation of the quadratic identity.

    ``2 theta S + theta + 1 - alpha`` equals ``-/+`` the discriminant root on the
    lower/upper branch, which is used directly as the denominator.
    """
    alpha = _check_alpha(alpha)
    s = stieltjes(theta, alpha)
    sign, disc = _branch(theta, alpha)
    if disc == 0.0:
        raise SingularityError(f"S'(theta) is singular at theta={theta!r}")
    return -sign * (s * s + s) / disc


def quadratic_residual(theta: float, s: float, alpha: float) -> float:
    """``theta S^2 + (theta + 1 - alpha) S + 1``; zero for the exact transform."""
    return theta * s * s + (theta + 1.0 - alpha) * s + 1.0
