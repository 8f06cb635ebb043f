"""Exception types raised by poik."""


class PoikError(Exception):
    """Base class for all library errors."""


class GuardExceeded(PoikError, ValueError):
    """Input lies outside the envelope of a reference-only evaluation path."""


class AllocationBound(PoikError, MemoryError):
    """Requested table is larger than the configured cap."""


class OutOfRange(PoikError, IndexError):
    """Index is outside the computed table."""


class DomainError(PoikError, ValueError):
    """Arguments fall outside the domain where a formula is defined."""


class BracketFailure(PoikError, ArithmeticError):
    """No sign change was found while bracketing a root."""


class SingularSystem(PoikError, ArithmeticError):
    """Least-squares design matrix is rank deficient."""
