"""Budget-constrained portfolio extrema under Wishart-distributed risk.

``rmt_core`` and ``theory`` give the large-N closed forms, ``market_sim`` and
``finite_solver`` solve sampled instances exactly, and ``experiment`` averages the
two against each other.
"""
from .errors import (
    BranchError,
    ConvergenceError,
    DegeneracyError,
    DivergenceError,
    DomainError,
    InfeasibleError,
    PoleError,
    RMTPortfolioError,
    SingularityError,
)
from .rmt_core import MarketShape, mp_density, mp_support, stieltjes, stieltjes_derivative
from .theory import budget_only, dual_max, dual_min, primal_max, primal_min, primal_min_inequality

__version__ = "0.1.0"
