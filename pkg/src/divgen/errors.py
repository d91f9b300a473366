"""Exception hierarchy shared by all modules.

The CLI maps ``DomainError``, ``PreconditionError``, ``NumericError`` and
``ResourceError`` to exit code 1 and ``UsageError`` to exit code 2.
"""


class DivgenError(Exception):
    """Base class for all library errors."""


class DomainError(DivgenError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class PreconditionError(DivgenError):
    """A mathematical precondition of an operation was verified to fail."""


class NumericError(DivgenError, ArithmeticError):
    """A numerical routine failed (divergent integral, non-convergence)."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class ResourceError(DivgenError):
    """The requested instance is too large to enumerate."""


class UnsupportedInstanceError(DivgenError):
    """The exact procedure does not apply to this instance."""


class UsageError(DivgenError):
    """Invalid combination of arguments."""
