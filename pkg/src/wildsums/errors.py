"""Exception types shared across the toolkit.

The CLI maps these onto process exit codes: format errors exit 1,
precondition violations exit 2, resource-cap errors exit 3.
"""
from __future__ import annotations


class WildsumsError(Exception):
    """Base class for all toolkit errors."""


class FormatError(WildsumsError):
    """A model file (or other structured input) is malformed.

    Carries the 1-based line number when the offending line is known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PreconditionError(WildsumsError, ValueError):
    """An argument violates a documented precondition."""


class ResourceCapError(WildsumsError, RuntimeError):
    """A computation would exceed its configured resource budget."""
