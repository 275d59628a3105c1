"""Exception types shared across the package."""


class SVIError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(SVIError):
    """A vector does not conform to the expected block structure.

    Carries the index of the offending block when known.
    """

    def __init__(self, message: str, block: int | None = None):
        super().__init__(message)
        self.block = block


class ParameterError(SVIError):
    """A scheme or configuration parameter violates its admissible range."""


class ProjectionError(SVIError):
    """Iterative projection failed to converge.

    Carries the last iterate and the constraint residual so callers can
    diagnose the instance.
    """

    def __init__(self, message: str, last_iterate=None, residual: float | None = None,
                 block: int | None = None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual
        self.block = block


class DomainError(SVIError):
    """A map was evaluated outside the set it is defined on."""


class ConvergenceError(SVIError):
    """An iterative solver exhausted its budget before reaching tolerance."""

    def __init__(self, message: str, last_iterate=None, residual: float | None = None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual
