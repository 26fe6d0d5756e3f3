"""Exception types shared across the package."""


class ConepassError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(ConepassError):
    """A numeric or structural parameter violates a precondition."""


class InvalidNonlinearityError(ConepassError):
    """The nonlinearity fails a structural requirement (no transversal
    intersection with s^(p-1), inconsistent derivatives, ...)."""


class UnsupportedNonlinearityError(ConepassError):
    """No admissible shift/truncation exists for this nonlinearity."""


class TruncationFailureError(ConepassError):
    """The truncation audit failed after the maximum number of blend widenings."""


class NonconvergenceError(ConepassError):
    """An iterative solver hit its iteration budget before the tolerance."""

    def __init__(self, message, last_iterate=None, grad_norm=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.grad_norm = grad_norm


class GeometryError(ConepassError):
    """The mountain-pass geometry could not be certified (alpha <= 0, no
    admissible path endpoint, ...)."""


class ShootingFailureError(ConepassError):
    """No bracketed, cone-admissible shooting solution was found."""


class DegenerateInputError(ConepassError):
    """An input profile is degenerate for the requested operation
    (e.g. identically zero where a positive integral is required)."""
