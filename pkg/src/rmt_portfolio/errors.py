"""Exception hierarchy shared by the library and the command-line front end."""


class RMTPortfolioError(Exception):
    """Base class for all library errors."""


class DomainError(RMTPortfolioError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class BranchError(DomainError):
    """A multiplier falls inside the Marchenko-Pastur bulk (or its guard band)."""


class DivergenceError(DomainError):
    """The requested quantity diverges (for example S(0) with alpha <= 1)."""


class SingularityError(DomainError):
    """An implicit-derivative denominator vanishes."""


class PoleError(DomainError):
    """A multiplier coincides with an eigenvalue of the sampled matrix."""


class DegeneracyError(DomainError):
    """The optimum is not unique (rank-deficient covariance, for example)."""


class InfeasibleError(DomainError):
    """No portfolio satisfies the requested constraints."""


class ConvergenceError(RMTPortfolioError, RuntimeError):
    """An iterative routine failed to converge; carries diagnostics."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics
