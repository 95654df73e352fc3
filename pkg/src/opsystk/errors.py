"""Exceptions raised by the toolkit, with the CLI exit code each one maps to."""

from __future__ import annotations

from typing import Any


class ToolkitError(Exception):
    """Base exception for toolkit errors."""

    exit_code = 4

    def __init__(self, message: str, suggestion: str | None = None):
        super().__init__(message)
        self.message = message
        self.suggestion = suggestion

    def to_dict(self) -> dict[str, Any]:
        """Convert error to dictionary for JSON output."""
        result: dict[str, Any] = {"error": self.message, "kind": type(self).__name__}
        if self.suggestion:
            result["suggestion"] = self.suggestion
        result["exit_code"] = self.exit_code
        return result


class InputError(ToolkitError):
    """Malformed or inconsistent input: bad JSON, shapes, names, dependent bases."""

    exit_code = 3

    def __init__(
        self,
        message: str,
        suggestion: str | None = None,
        line: int | None = None,
        column: int | None = None,
    ):
        super().__init__(message, suggestion)
        self.line = line
        self.column = column

    def to_dict(self) -> dict[str, Any]:
        result = super().to_dict()
        if self.line is not None:
            result["line"] = self.line
            result["column"] = self.column
        return result


class UnsupportedQueryError(InputError):
    """A query outside the exact-or-certified scope of the toolkit."""


class VerificationError(ToolkitError):
    """A certificate failed independent re-verification."""


class SolverError(ToolkitError):
    """The SDP engine hit a numerical failure it could not report as a status."""


class AsymmetryWarning(UserWarning):
    """Emitted when a matrix is symmetrized beyond the JSON round-trip noise level."""
