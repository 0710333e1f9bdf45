"""Exception types shared across the package."""


class SteinWeissError(Exception):
    """Base class for all package-specific errors."""


class NonPositiveExponent(SteinWeissError, ValueError):
    """An exponent relation has no solution in (1, inf)."""


class DivergentIntegral(SteinWeissError, ValueError):
    """A closed-form power integral diverges for the given exponent."""


class DomainError(SteinWeissError, ValueError):
    """A point or parameter lies outside the operator's domain."""


class QuadratureFailure(SteinWeissError, RuntimeError):
    """Adaptive quadrature could not reach the requested tolerance."""


class BadGrid(SteinWeissError, ValueError):
    """Grid construction preconditions violated."""


class GridMismatch(SteinWeissError, ValueError):
    """Profile grid does not match the operator context's grid."""


class ZeroImage(SteinWeissError, RuntimeError):
    """An operator image vanished identically where positivity was required."""


class PreconditionError(SteinWeissError, ValueError):
    """A documented precondition of an operation was violated."""


class HypothesisNotSatisfied(SteinWeissError, ValueError):
    """The hypothesis of the asymptotic limit does not hold for this side."""


class InsufficientSupport(SteinWeissError, ValueError):
    """A profile lacks usable values on the requested decade."""
