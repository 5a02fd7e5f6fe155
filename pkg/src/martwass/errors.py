"""Exception types raised across the package."""


class MartwassError(Exception):
    """Base class for all library errors."""


class DomainError(MartwassError, ValueError):
    """An argument lies outside the domain where the operation is defined."""


class DimensionMismatch(MartwassError, ValueError):
    pass


class NotInConvexOrder(MartwassError):
    """The pair (mu, nu) is not ordered, so no martingale coupling exists."""


class EqualMeasures(MartwassError):
    """mu == nu; the inverse-transform construction degenerates to the identity."""


class DegenerateSupport(MartwassError):
    pass


class MarginalMismatch(MartwassError, ValueError):
    pass


class ConditionalMeanViolation(MartwassError):
    """Some direction fibre of mu does not have the global mean as its mean."""

    def __init__(self, message, directions=()):
        super().__init__(message)
        self.directions = list(directions)


class DegeneratePair(MartwassError):
    pass
