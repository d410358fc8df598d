"""Exception types shared across the package."""


class ElastipathError(Exception):
    """Base class for all package errors."""


class OutOfDomainError(ElastipathError):
    """A point or index falls outside the discretized domain."""


class DegenerateGradientError(ElastipathError):
    """Dual-norm / optimal-direction query with a zero gradient."""


class SolverError(ElastipathError):
    """Fast marching or fixed-point iteration failed its contract."""


class ConvergenceError(SolverError):
    """Iterative solve did not reach tolerance within the sweep budget."""

    def __init__(self, message, residual=None, sweeps=None):
        super().__init__(message)
        self.residual = residual
        self.sweeps = sweeps


class TraceError(ElastipathError):
    """Geodesic back-tracking failed; may carry the partial path."""

    def __init__(self, message, partial_path=None):
        super().__init__(message)
        self.partial_path = partial_path


class SeedError(ElastipathError):
    """Invalid or unreachable application seed."""
