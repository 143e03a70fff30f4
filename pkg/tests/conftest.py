from __future__ import annotations

from fractions import Fraction

import pytest

from fedgov.checks import replay
from fedgov.engine import EngineConfig, run_trace
from fedgov.trace import parse_trace

EXAMPLE_TRACE = """\
# the seven-event running example
t=1 kind=participate person=Alice community=A
t=2 kind=participate person=Bob community=B
t=3 kind=federate community=X child=A
t=4 kind=join parent=X child=B
t=5 kind=participate person=Carol community=C
t=6 kind=federate community=Y child=X
t=7 kind=join parent=Y child=C
"""


def two_children_trace(t: int = 0) -> str:
    """Two federations U and V of three people each, joined under F (n=3)."""
    lines = []
    for i, p in enumerate(["p1", "p2", "p3", "p4", "p5", "p6"], start=1):
        lines.append(f"t={t} kind=participate person={p} community=L{i}")
    lines += [
        f"t={t} kind=federate community=U child=L1",
        f"t={t} kind=join parent=U child=L2",
        f"t={t} kind=join parent=U child=L3",
        f"t={t} kind=federate community=V child=L4",
        f"t={t} kind=join parent=V child=L5",
        f"t={t} kind=join parent=V child=L6",
        f"t={t} kind=federate community=F child=U",
        f"t={t} kind=join parent=F child=V",
    ]
    return "\n".join(lines) + "\n"


def flat_trace(people: int, t: int = 0, name: str = "F") -> str:
    """One community ``name`` over ``people`` singleton leaves, all at time t."""
    lines = [f"t={t} kind=participate person=q{i} community=L{i}" for i in range(1, people + 1)]
    lines.append(f"t={t} kind=federate community={name} child=L1")
    lines += [f"t={t} kind=join parent={name} child=L{i}" for i in range(2, people + 1)]
    return "\n".join(lines) + "\n"


@pytest.fixture
def example_events():
    return parse_trace(EXAMPLE_TRACE)


@pytest.fixture
def example_run(example_events):
    return run_trace(example_events, EngineConfig(n=2, tau=10), horizon=7 + 300 * 10)


def tick_integrals(log, upto: int):
    """Seat and share integrals by summing one tick at a time over replayed states.

    A third, deliberately naive route to the same numbers: every unit
    interval [t, t+1) is charged the state in force at t.
    """
    n = log.header["n"]
    seat: dict[tuple, int] = {}
    share: dict[tuple, Fraction] = {}
    for t, t_next, snap in replay(log):
        g = snap.graph
        for tick in range(t, min(t_next, upto)):
            for f in g.nodes:
                pop = g.population(f)
                if not pop:
                    continue
                members = set(snap.assemblies[f])
                for p in pop:
                    key = ("person", p, f)
                    seat[key] = seat.get(key, 0) + (p in members)
                    share[key] = share.get(key, 0) + min(Fraction(n, len(pop)), Fraction(1))
                kids = g.children(f)
                for v in kids:
                    w = sum(
                        Fraction(1, sum(1 for u in kids if p in g.population(u))) for p in g.population(v)
                    )
                    key = ("child", v, f)
                    seat[key] = seat.get(key, 0) + len(members & g.population(v))
                    share[key] = share.get(key, 0) + n * w / len(pop)
    return seat, share


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict[str, str] = {}


def record(criterion: str, ok: bool, detail: str) -> None:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int(k.rstrip("ab")), k)):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
