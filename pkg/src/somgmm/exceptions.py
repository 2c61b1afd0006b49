"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, data problems
exit 2, numeric aborts exit 3.
"""


class SomGmmError(Exception):
    """Base class for all package errors."""


class UsageError(SomGmmError, ValueError):
    """Caller misuse: bad indices, mismatched shapes, invalid configuration."""


class DataError(SomGmmError, ValueError):
    """Problems with external data: unreadable files, bad formats, non-finite input."""


class NumericsError(SomGmmError, RuntimeError):
    """Training produced a non-finite quantity; carries a diagnostic snapshot."""

    def __init__(self, message, snapshot=None):
        super().__init__(message)
        self.snapshot = snapshot
