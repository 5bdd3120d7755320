"""Synthetic return matrices, Wishart matrices and their spectral decompositions."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ConvergenceError, DomainError, PoleError
from .rmt_core import MarketShape, mp_density, mp_support

POLE_GUARD = 1e-12


class Distribution(str, Enum):
    STANDARD_NORMAL = "standard_normal"
    RADEMACHER = "rademacher"


def substream(master_seed: int, sample_index: int = 0) -> np.random.Generator:
    """Counter-based generator keyed on ``(master_seed, sample_index)``.

    Each Monte Carlo sample gets its own stream, so results do not depend on how
    samples are distributed across workers.
    """
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(sample_index),))
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True, eq=False)
class ReturnMatrix:
    """N x p matrix of zero-mean, unit-variance modified returns."""

    shape: MarketShape
    entries: np.ndarray
    distribution: Distribution
    seed: int
    sample_index: int = 0


@dataclass(frozen=True, eq=False)
class WishartMatrix:
    shape: MarketShape
    entries: np.ndarray


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Ascending eigenvalues, eigenvectors (columns) and overlaps ``u = V^T e``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    overlaps: np.ndarray
    residual: float
    shape: MarketShape | None = field(default=None)

    @property
    def size(self) -> int:
        return self.eigenvalues.shape[0]

    @classmethod
    def from_matrix(cls, matrix) -> "SpectralDecomposition":
        """Decompose an arbitrary symmetric matrix (used for hand-built test cases)."""
        shape = None
        if isinstance(matrix, WishartMatrix):
            shape = matrix.shape
            matrix = matrix.entries
        return decompose(WishartMatrix(shape, np.asarray(matrix, dtype=float)))


def generate_returns(
    num_assets: int,
    num_periods: int,
    dist: Distribution | str = Distribution.STANDARD_NORMAL,
    seed: int = 0,
    sample_index: int = 0,
) -> ReturnMatrix:
    if num_assets < 2 or num_periods < 1:
        raise DomainError(f"need N >= 2 and p >= 1, got N={num_assets}, p={num_periods}")
    dist = Distribution(dist)
    rng = substream(seed, sample_index)
    size = (int(num_assets), int(num_periods))
    if dist is Distribution.STANDARD_NORMAL:
        x = rng.standard_normal(size)
    else:
        x = 2.0 * rng.integers(0, 2, size=size).astype(float) - 1.0
    return ReturnMatrix(MarketShape.from_counts(*size), x, dist, int(seed), int(sample_index))


def wishart(returns: ReturnMatrix) -> WishartMatrix:
    """``J = X X^T / N``, symmetrised so that ``J == J.T`` holds bit for bit."""
    x = returns.entries
    j = (x @ x.T) / x.shape[0]
    j = np.triu(j) + np.triu(j, 1).T
    return WishartMatrix(returns.shape, j)


def decompose(matrix: WishartMatrix) -> SpectralDecomposition:
    j = np.asarray(matrix.entries, dtype=float)
    if j.ndim != 2 or j.shape[0] != j.shape[1]:
        raise DomainError("matrix must be square")
    try:
        lam, vecs = np.linalg.eigh(j)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigensolver failed: {exc}") from exc
    residual = float(np.max(np.abs(j @ vecs - vecs * lam))) if j.size else 0.0
    scale = max(1.0, float(abs(lam[-1])))
    if residual > 1e-8 * scale or np.any(lam < -1e-8 * scale):
        raise ConvergenceError("eigendecomposition failed its residual check", residual=residual)
    overlaps = vecs.sum(axis=0)
    return SpectralDecomposition(lam, vecs, overlaps, residual, matrix.shape)


def sample_decomposition(
    shape: MarketShape,
    seed: int,
    sample_index: int = 0,
    dist: Distribution | str = Distribution.STANDARD_NORMAL,
) -> SpectralDecomposition:
    """Generate, build the Wishart matrix and decompose in one call."""
    x = generate_returns(shape.num_assets, shape.num_periods, dist, seed, sample_index)
    return decompose(wishart(x))


def _resolvent_weights(dec: SpectralDecomposition, theta: float) -> np.ndarray:
    gaps = dec.eigenvalues - theta
    if np.min(np.abs(gaps)) <= POLE_GUARD * max(1.0, abs(theta)):
        raise PoleError(f"theta={theta!r} coincides with an eigenvalue")
    return 1.0 / gaps


def empirical_stieltjes(dec: SpectralDecomposition, theta: float) -> float:
    """``S_N(theta) = e^T (J - theta I)^{-1} e / N`` in the spectral representation."""
    inv = _resolvent_weights(dec, theta)
    return float(np.dot(dec.overlaps ** 2, inv) / dec.size)


def empirical_stieltjes_derivative(dec: SpectralDecomposition, theta: float) -> float:
    inv = _resolvent_weights(dec, theta)
    return float(np.dot(dec.overlaps ** 2, inv * inv) / dec.size)


@dataclass(frozen=True)
class SpectrumHistogram:
    """Normalised eigenvalue histogram; ``zero_mass`` counts eigenvalues at zero."""

    bin_edges: np.ndarray
    bin_centers: np.ndarray
    density: np.ndarray
    zero_mass: float

    @property
    def bin_mass(self) -> np.ndarray:
        return self.density * np.diff(self.bin_edges)


def spectrum_histogram(
    dec: SpectralDecomposition, bins: int = 50, zero_tol: float = 1e-8
) -> SpectrumHistogram:
    """Histogram of the spectrum with total mass one, atom at zero reported separately.

    Bins span ``[min, max]`` of the non-null eigenvalues, or ``[l - 0.5, l + 0.5]``
    when the spectrum is a single point.
    """
    if bins < 10:
        raise DomainError("bins must be >= 10")
    lam = dec.eigenvalues
    n = lam.shape[0]
    scale = max(1.0, float(lam[-1]))
    null = lam <= zero_tol * scale
    bulk = lam[~null]
    zero_mass = float(np.count_nonzero(null)) / n
    if bulk.size == 0:
        edges = np.linspace(-0.5, 0.5, bins + 1)
        return SpectrumHistogram(edges, 0.5 * (edges[1:] + edges[:-1]), np.zeros(bins), zero_mass)
    lo, hi = float(bulk[0]), float(bulk[-1])
    if hi - lo < 1e-12 * scale:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(bulk, bins=bins, range=(lo, hi))
    density = counts / (n * np.diff(edges))
    return SpectrumHistogram(edges, 0.5 * (edges[1:] + edges[:-1]), density, zero_mass)


def histogram_l1_distance(hist: SpectrumHistogram, alpha: float, points_per_bin: int = 64) -> float:
    """L1 distance between the histogram and the Marchenko-Pastur law.

    The continuous part is compared bin by bin (midpoint-rule averaged density over
    each bin, plus the law's mass outside the histogram range); the atoms are compared
    as ``|zero_mass - max(1 - alpha, 0)|``.
    """
    support = mp_support(alpha)
    edges = hist.bin_edges
    t = (np.arange(points_per_bin) + 0.5) / points_per_bin
    widths = np.diff(edges)
    pts = edges[:-1, None] + widths[:, None] * t[None, :]
    law_mass = np.asarray(mp_density(pts, alpha)).mean(axis=1) * widths
    dist = float(np.sum(np.abs(hist.bin_mass - law_mass)))
    bulk_mass = 1.0 - support.zero_mass
    dist += max(bulk_mass - float(law_mass.sum()), 0.0)
    dist += abs(hist.zero_mass - support.zero_mass)
    return dist


def export_spectrum_csv(dec: SpectralDecomposition, path) -> Path:
    """Write ``index, eigenvalue, overlap`` rows for external inspection."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "eigenvalue", "overlap"])
        for k, (lam, u) in enumerate(zip(dec.eigenvalues, dec.overlaps)):
            writer.writerow([k, repr(float(lam)), repr(float(u))])
    return path


def overlap_variance(dec: SpectralDecomposition) -> float:
    u = dec.overlaps
    return float(np.mean(u * u) - math.pow(float(np.mean(u)), 2))
