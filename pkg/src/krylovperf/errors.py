"""Exception types raised across the package."""


class ValidationError(ValueError):
    """Input data violates a structural invariant (negative rate, NaN, ...)."""


class SpecError(ValueError):
    """A measure description is incomplete or not applicable to the chain."""


class SolveError(RuntimeError):
    """A linear solve failed or produced an out-of-range result."""


class ResourceError(RuntimeError):
    """The requested computation exceeds a hard work limit."""


class ConvergenceError(RuntimeError):
    """Restarted Krylov iteration ran out of cycles before meeting the tolerance.

    The partial result is kept on the exception so callers can decide whether
    the accuracy reached is good enough for them.
    """

    def __init__(self, message, update_norms=(), result=None):
        super().__init__(message)
        self.update_norms = list(update_norms)
        self.result = result
