"""Exception types shared across the library."""


class OdebeatError(Exception):
    """Base class for all library-specific errors."""


class InvalidArgumentError(OdebeatError, ValueError):
    """An argument violates a documented precondition."""


class OutOfDomainError(OdebeatError, ValueError):
    """A time value falls outside the basis domain (no extrapolation)."""


class RankDeficiencyError(OdebeatError):
    """The normal equations are singular; a positive penalty weight would regularize them."""


class DegenerateDataError(OdebeatError):
    """Input curves carry no usable signal for parameter estimation (e.g. all zeros)."""


class UnsupportedPoleError(OdebeatError):
    """The requested response has a pole at s=0 and no finite steady state."""
