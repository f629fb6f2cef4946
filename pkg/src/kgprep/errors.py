"""Shared exception types."""

from __future__ import annotations


class RecordError(ValueError):
    """A single malformed input record (bad line, bad field, bad bytes).

    Pipelines skip and count these in lenient mode and abort in strict
    mode; line_no is 1-based when known.
    """

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no
