import numpy as np
import pytest

from rmt_portfolio.market_sim import SpectralDecomposition, sample_decomposition
from rmt_portfolio.rmt_core import MarketShape


def dense(dec):
    return (dec.eigenvectors * dec.eigenvalues) @ dec.eigenvectors.T


@pytest.fixture(scope="session")
def dec1000():
    return sample_decomposition(MarketShape.from_counts(1000, 2000), 1, 0)


@pytest.fixture(scope="session")
def dec50():
    return sample_decomposition(MarketShape.from_counts(50, 100), 3, 0)


@pytest.fixture
def diag13():
    return SpectralDecomposition.from_matrix(np.diag([1.0, 3.0]))
