"""Event traces: one ``key=value`` event per line.

    # comment
    t=1 kind=participate person=Alice community=A
    t=3 kind=federate community=X child=A
    t=4 kind=join parent=X child=B
    t=9 kind=leave parent=X child=B
    t=9 kind=remove_member person=Bob community=B
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .errors import TraceError

PARTICIPATE = "participate"
FEDERATE = "federate"
JOIN = "join"
LEAVE = "leave"
REMOVE_MEMBER = "remove_member"

FIELDS = {
    PARTICIPATE: ("person", "community"),
    FEDERATE: ("community", "child"),
    JOIN: ("parent", "child"),
    LEAVE: ("parent", "child"),
    REMOVE_MEMBER: ("person", "community"),
}

STRUCTURAL = frozenset({PARTICIPATE, FEDERATE, JOIN, LEAVE})

_ID = re.compile(r"^[^\s=#]+$")


@dataclass(frozen=True)
class TimedEvent:
    t: int
    kind: str
    person: str | None = None
    community: str | None = None
    parent: str | None = None
    child: str | None = None
    line: int | None = None

    def ids(self) -> dict[str, str]:
        return {k: getattr(self, k) for k in FIELDS[self.kind]}

    def describe(self) -> str:
        args = ", ".join(f"{k}={v}" for k, v in self.ids().items())
        return f"{self.kind}({args}) at t={self.t}"

    def to_line(self) -> str:
        return " ".join([f"t={self.t}", f"kind={self.kind}"] + [f"{k}={v}" for k, v in self.ids().items()])

    def to_dict(self) -> dict:
        return {"t": self.t, "op": self.kind, **self.ids()}


def participate(t, person, community) -> TimedEvent:
    return TimedEvent(t, PARTICIPATE, person=person, community=community)


def federate(t, community, child) -> TimedEvent:
    return TimedEvent(t, FEDERATE, community=community, child=child)


def join(t, parent, child) -> TimedEvent:
    return TimedEvent(t, JOIN, parent=parent, child=child)


def leave(t, parent, child) -> TimedEvent:
    return TimedEvent(t, LEAVE, parent=parent, child=child)


def remove_member(t, person, community) -> TimedEvent:
    return TimedEvent(t, REMOVE_MEMBER, person=person, community=community)


def parse_line(text: str, lineno: int | None = None) -> TimedEvent | None:
    text = text.strip()
    if not text or text.startswith("#"):
        return None
    fields: dict[str, str] = {}
    for tok in text.split():
        key, sep, value = tok.partition("=")
        if not sep or not key or not value:
            raise TraceError(f"malformed field {tok!r}", line=lineno)
        if key in fields:
            raise TraceError(f"duplicate field {key!r}", line=lineno)
        fields[key] = value
    kind = fields.pop("kind", None)
    if kind not in FIELDS:
        raise TraceError(f"unknown event kind {kind!r}", line=lineno)
    raw_t = fields.pop("t", None)
    if raw_t is None or not raw_t.isdigit():
        raise TraceError(f"timestamp must be a non-negative integer, got {raw_t!r}", line=lineno)
    want = FIELDS[kind]
    if set(fields) != set(want):
        raise TraceError(f"{kind} needs fields {list(want)}, got {sorted(fields)}", line=lineno)
    for value in fields.values():
        if not _ID.match(value):
            raise TraceError(f"malformed id {value!r}", line=lineno)
    return TimedEvent(int(raw_t), kind, line=lineno, **fields)


def parse_trace(text: str) -> list[TimedEvent]:
    """Parse a whole trace; timestamps must be non-decreasing in file order."""
    events: list[TimedEvent] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        ev = parse_line(raw, lineno)
        if ev is None:
            continue
        if events and ev.t < events[-1].t:
            raise TraceError(
                f"clock regression: t={ev.t} after t={events[-1].t}", line=lineno, event=ev, clause="non-decreasing clock"
            )
        events.append(ev)
    return events


def read_trace(path: str | Path) -> list[TimedEvent]:
    return parse_trace(Path(path).read_text(encoding="utf-8"))


def format_trace(events, header: list[str] | None = None) -> str:
    lines = [f"# {h}" for h in (header or [])]
    lines += [e.to_line() for e in events]
    return "\n".join(lines) + "\n"
