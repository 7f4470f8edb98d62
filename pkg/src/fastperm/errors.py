"""Exception hierarchy shared by the library and the command line."""


class FastPermError(Exception):
    """Base class for all errors raised by fastperm."""


class DomainError(FastPermError, ValueError):
    """An argument lies outside the domain of a function."""


class ConvergenceError(FastPermError, ArithmeticError):
    """An iterative routine hit its iteration cap.

    ``last`` carries the final iterate when one is meaningful.
    """

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class DataError(FastPermError, ValueError):
    """Input data are malformed or violate a statistic's requirements."""


class UnsupportedError(FastPermError, ValueError):
    """A method/statistic combination that has no implementation."""
