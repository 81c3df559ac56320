"""Exception hierarchy for ietlab."""


class IETError(ValueError):
    """Base class for all data errors raised by ietlab."""


class NonUnitSum(IETError):
    pass


class NegativeLength(IETError):
    pass


class NotAPermutation(IETError):
    pass


class OutOfDomain(IETError):
    pass


class DegenerateLength(IETError):
    """A dynamical operation was asked of an IET with a zero length."""


class TieBreakdown(IETError):
    """Rauzy-Veech induction is undefined: the two competing lengths are equal."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ReduciblePermutation(IETError):
    pass


class SearchBudgetExceeded(IETError):
    pass


class SeriesTooShort(IETError):
    pass


class InsufficientData(IETError):
    pass


class UnmappedClaim(IETError):
    pass


class FormatError(IETError):
    """Malformed IET / word / matrix text."""
