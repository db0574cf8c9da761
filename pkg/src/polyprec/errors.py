"""Exception types shared across the package."""


class PolyprecError(Exception):
    """Base class for all package-specific errors."""


class NotSPDError(PolyprecError):
    """A matrix block that must be symmetric positive definite is not.

    Raised when a Cholesky pivot is non-positive or falls below the
    breakdown threshold relative to the largest diagonal entry.
    """


class ShapeMismatchError(PolyprecError):
    """Operands have incompatible dimensions."""


class GridTooSmallError(PolyprecError):
    """The grid admits no cutting plane at the first partition level."""


class NonSymmetricPatternError(PolyprecError):
    """The sparsity pattern of an input matrix is not symmetric."""


class IndefiniteDetectedError(PolyprecError):
    """An iterative method encountered a non-positive curvature direction,
    signaling that the operator or preconditioner is not SPD."""


class NonPositiveFieldError(PolyprecError):
    """A coefficient field contains non-positive or non-finite values."""


class ParseError(PolyprecError):
    """An input file could not be parsed."""


class CountMismatchError(ParseError):
    """A file declared a different number of values than it contains."""


class NotSymmetricError(PolyprecError):
    """A matrix read from file is not symmetric."""


class DimensionMismatchError(PolyprecError):
    """Matrix, coordinate, or grid dimensions are inconsistent."""
