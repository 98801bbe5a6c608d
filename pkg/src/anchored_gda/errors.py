"""Exception hierarchy shared across the package.

Each class maps onto one CLI exit code (see cli.EXIT_*).
"""


class AnchoredGDAError(Exception):
    """Base class for all package errors."""


class UsageError(AnchoredGDAError):
    """Bad arguments, bad config, or a violated precondition."""


class DataError(AnchoredGDAError):
    """A trace or report is missing columns/rows a check requires."""


class NumericError(AnchoredGDAError):
    """An iteration produced non-finite values or failed to converge."""


class DegenerateFitError(AnchoredGDAError):
    """Rate fitting hit an exactly-zero gradient norm in the window."""


class DivergenceError(NumericError):
    """Iterates exceeded the magnitude cap; carries the halting step.

    The partial trace accumulated up to the failure is attached as
    ``partial_trace`` when available.
    """

    def __init__(self, message, t=None, partial_trace=None):
        super().__init__(message)
        self.t = t
        self.partial_trace = partial_trace
