"""Exception types shared across the package."""
from .gamma import PoleError

__all__ = [
    "PoleError",
    "DomainError",
    "ParameterError",
    "NotApplicableError",
    "PreconditionError",
    "SeriesDivergenceError",
    "ContourError",
    "NonConvergenceError",
    "UnsupportedBranchError",
    "QuadratureError",
    "TruncationWarning",
    "GridResolutionWarning",
]


class DomainError(ValueError):
    """Argument outside the domain where the quantity is defined."""


class ParameterError(ValueError):
    """Invalid parameter set or configuration value.

    ``key`` names the offending configuration field when there is one.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class NotApplicableError(ValueError):
    """A parameter identity was requested for a set it does not apply to."""


class PreconditionError(ValueError):
    """Precondition of a parameter identity is violated."""


class SeriesDivergenceError(ArithmeticError):
    """Series terms grew past the overflow guard."""


class ContourError(ArithmeticError):
    """No admissible integration contour for the requested argument."""


class NonConvergenceError(ArithmeticError):
    """Evaluation did not reach the requested tolerance."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class UnsupportedBranchError(ValueError):
    """Requested region needs a branch choice the library does not make."""


class QuadratureError(ArithmeticError):
    """Oracle quadrature failed to converge.

    ``trace`` holds the partial sums (or panel contributions) seen so far.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = [] if trace is None else list(trace)


class TruncationWarning(UserWarning):
    """A truncated sum stopped while its last retained terms were above tolerance."""


class GridResolutionWarning(UserWarning):
    """The kernel oscillates on a scale the evolution grid cannot resolve."""
