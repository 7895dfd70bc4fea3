"""Exception hierarchy for sbmca."""

from typing import Optional


class SbmcaError(Exception):
    """Base class for all sbmca errors."""


class InvalidArgumentError(SbmcaError, ValueError):
    """Raised when a caller passes arguments outside an operation's contract."""


class InvalidStateError(SbmcaError, RuntimeError):
    """Raised when an object's metadata is internally inconsistent."""


class NumericFailureError(SbmcaError, ArithmeticError):
    """Raised when a stage produces non-finite values."""

    def __init__(self, stage: str, message: Optional[str] = None):
        self.stage = stage
        super().__init__(message or f"non-finite values produced in stage '{stage}'")


class StorageError(SbmcaError, OSError):
    """Raised when a file cannot be read or written."""

    def __init__(self, path, message: str):
        self.path = str(path)
        super().__init__(f"{message}: {self.path}")
