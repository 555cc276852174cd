class OSAError(Exception):
    """Base class for errors raised by this package."""


class DimensionMismatch(OSAError, ValueError):
    pass


class DegenerateWeights(OSAError):
    """Sampling weights sum to (numerically) zero.

    Raised when the current span already fits every point exactly, so there
    is nothing left to sample. Callers treat it as an early success.
    """


class BudgetExceeded(OSAError):
    """A brute-force enumeration would exceed its configured budget."""
