"""Exception hierarchy shared by all modules.

The CLI maps ``PreconditionError`` (and subclasses) to exit code 2 and
``NumericalFailure`` to exit code 3.
"""


class Bdf2Error(Exception):
    """Base class for library errors."""


class PreconditionError(Bdf2Error, ValueError):
    """An input violates a documented precondition."""


class InvalidArgument(PreconditionError):
    pass


class DomainError(PreconditionError):
    """A quantity is requested outside the range where it is defined."""


class GridMismatch(PreconditionError):
    pass


class StateError(Bdf2Error, RuntimeError):
    """An object is not in the state required by the operation."""


class NumericalFailure(Bdf2Error, ArithmeticError):
    """An iterative solver failed to converge."""
