"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: :class:`DomainError` -> 1,
:class:`ResourceError` -> 2, :class:`AccuracyError` -> 3.
"""


class ToruslabError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class DomainError(ToruslabError, ValueError):
    """Arguments outside the mathematical domain of an operation."""

    exit_code = 1


class SingularityError(DomainError):
    """Evaluation at (or numerically at) a singular point."""


class ResourceError(ToruslabError):
    """A configured budget (lattice points, sum terms, memory) was exceeded."""

    exit_code = 2


class AccuracyError(ToruslabError, ArithmeticError):
    """A numerical routine could not reach its advertised accuracy."""

    exit_code = 3


class AccuracyWarning(UserWarning):
    """Result returned, but outside the regime where accuracy is guaranteed."""
