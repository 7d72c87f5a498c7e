"""Exception types shared across the package."""


class HalfSpaceError(ValueError):
    """Base class for invalid input to a half-space operation."""


class CoincidentPointsError(HalfSpaceError):
    """Raised when an unregularized kernel is evaluated at x = y."""


class PreconditionError(HalfSpaceError):
    """Raised when an operation's stated precondition does not hold."""


class MeasureError(HalfSpaceError):
    """Raised for malformed or inadmissible measure documents."""


class QuadratureError(RuntimeError):
    """Raised when adaptive quadrature fails to reach the requested tolerance."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
