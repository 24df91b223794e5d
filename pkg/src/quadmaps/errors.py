"""Exception hierarchy for quadmaps."""


class QuadMapError(ValueError):
    """Base class for all domain errors raised by this package."""


class NotQuadraticError(QuadMapError):
    """All six degree-two coefficients vanish (within tolerance)."""


class SingularMapError(QuadMapError):
    """An affine map that must be invertible is singular."""


class VerificationError(QuadMapError):
    """A witness failed its residual check.

    Attributes:
        residual: the offending residual.
        trace: reduction trace collected up to the failure, if any.
    """

    def __init__(self, message, residual=None, trace=None, details=None):
        super().__init__(message)
        self.residual = residual
        self.trace = trace or []
        self.details = details or {}


class NoGuaranteedRootError(QuadMapError):
    """The cubic does not satisfy the sign conditions that guarantee a positive root."""


class WrongBranchError(QuadMapError):
    """Input parameter belongs to a different reduction branch."""


class EmptySetError(QuadMapError):
    """The critical set is empty, so there is nothing to sample."""


class NotACurveError(QuadMapError):
    """Operation needs a one-dimensional critical set."""


class NotApplicableError(QuadMapError):
    """Operation is undefined for this class of map."""


class NotInvertibleError(QuadMapError):
    """The map has no quadratic inverse (it is not in the bijective class)."""
