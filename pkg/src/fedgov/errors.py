"""Exception types shared across the package."""

from __future__ import annotations


class TraceError(ValueError):
    """An event trace is malformed or an event's precondition does not hold."""

    def __init__(self, message: str, line: int | None = None, event=None, clause: str | None = None):
        self.line = line
        self.event = event
        self.clause = clause
        super().__init__(message)

    def __str__(self) -> str:
        msg = super().__str__()
        if self.line is not None:
            msg = f"line {self.line}: {msg}"
        if self.clause:
            msg = f"{msg} (clause: {self.clause})"
        return msg


class ScenarioError(ValueError):
    """A scenario description is inconsistent."""


class InternalError(RuntimeError):
    """An engine invariant broke; this is a bug, not a problem with the input."""
