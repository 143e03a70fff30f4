"""Checkers that read a finished run log.

Everything here works from the log alone: states are rebuilt by replaying
entries, and metric integrals are recomputed segment by segment from the
measure definitions, without touching the engine's incremental ledger.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .graph import ASSEMBLY_MEMBERSHIP, FederationGraph, ValidityReport, Violation, assembly_violations, structure_violations
from .metrics import (
    CHILD,
    PERSON,
    child_shares,
    child_weights,
    membership_counts,
    ratio_of,
    representation_floor,
)

STRUCTURAL_OPS = frozenset({"participate", "federate", "join", "leave", "gc"})


def stabilization_time(log) -> int:
    """Time of the last change to the node or edge set (0 if none)."""
    return max((e["t"] for e in log.entries if e["op"] in STRUCTURAL_OPS), default=0)


def horizon_of(log) -> int:
    """The run's final time: the header's horizon, else the last entry's time."""
    if "horizon" in log.header:
        return log.header["horizon"]
    return log.entries[-1]["t"] if log.entries else 0


# -- replay ---------------------------------------------------------------


@dataclass
class Snapshot:
    """Replayed federation: graph, colored assemblies {f: {person: color}}, n.

    ``touched`` holds the communities whose seats changed since the previous
    yielded state; ``version`` of the graph tells whether the structure did.
    """

    graph: FederationGraph
    assemblies: dict[str, dict[str, str | None]]
    n: int
    touched: set[str] = field(default_factory=set)


def _apply(snap: Snapshot, e: dict) -> None:
    g, op = snap.graph, e["op"]
    if op == "participate":
        g.add_leaf(e["community"], [e["person"]])
        snap.assemblies[e["community"]] = {}
    elif op == "federate":
        g.add_node(e["community"])
        g.add_edge(e["community"], e["child"])
        snap.assemblies[e["community"]] = {}
    elif op == "join":
        g.add_edge(e["parent"], e["child"])
    elif op == "leave":
        g.remove_edge(e["parent"], e["child"])
    elif op == "gc":
        g.remove_node(e["community"])
        del snap.assemblies[e["community"]]
    elif op == "add":
        snap.assemblies[e["community"]][e["person"]] = e["color"]
        snap.touched.add(e["community"])
    elif op == "remove":
        del snap.assemblies[e["community"]][e["person"]]
        snap.touched.add(e["community"])
    elif op in ("remove_member", "warn"):
        pass
    else:
        raise ValueError(f"malformed log entry {e!r}")


def replay(log):
    """Yield (t, t_next, snapshot) for each state that persists for t_next - t >= 0.

    The initial empty state and the state left after the last timestamp are
    always included; every other yielded state has positive dwell. The
    snapshot object is reused, so consume it before advancing.
    """
    snap = Snapshot(FederationGraph(), {}, log.header["n"])
    horizon = horizon_of(log)
    body = log.entries
    times = sorted({e["t"] for e in body})
    first = times[0] if times else horizon
    if first > 0 or not times:
        yield 0, first, snap
    i = 0
    for k, t in enumerate(times):
        snap.touched = set()
        while i < len(body) and body[i]["t"] == t:
            _apply(snap, body[i])
            i += 1
        nxt = times[k + 1] if k + 1 < len(times) else max(horizon, t)
        yield t, nxt, snap


class _PerCommunity:
    """Re-evaluates a per-community check only where something changed.

    Results for untouched communities are carried over, so every persisting
    state is still judged in full.
    """

    def __init__(self, structural, local) -> None:
        self.structural = structural  # (snap, f) -> cached per structure signature
        self.local = local  # (snap, f, cached) -> findings for the current seats
        self.version = None
        self.sigs: dict[str, tuple] = {}
        self.cache: dict[str, object] = {}
        self.found: dict[str, list] = {}

    def step(self, snap: Snapshot) -> list:
        g = snap.graph
        if g.version != self.version:
            self.version = g.version
            todo = set(g.nodes)
            for f in list(self.found):
                if f not in g:
                    del self.found[f]
            for f in sorted(g.nodes):
                sig = (g.children(f), g.population(f), frozenset(g.population(v) for v in g.children(f)))
                if self.sigs.get(f) != sig:
                    self.sigs[f] = sig
                    self.cache[f] = self.structural(snap, f)
        else:
            todo = snap.touched & g.nodes
        for f in todo:
            self.found[f] = self.local(snap, f, self.cache[f])
        return [x for f in sorted(self.found) for x in self.found[f]]


@dataclass(frozen=True)
class PFRViolation:
    t: int
    community: str
    child: str
    seats: int
    floor: int


def check_pfr(log, strict: bool = False) -> list[PFRViolation]:
    """Every persisting state: seats(v, f) >= floor of share(v, f) for each child.

    ``strict`` uses the bare floor of the share; by default the floor is
    capped at |P_v| (see :func:`fedgov.metrics.representation_floor`).
    """

    def floors(snap, f):
        g = snap.graph
        shares = child_shares(g, f, snap.n)
        if strict:
            return {v: math.floor(x) for v, x in shares.items()}
        return {v: representation_floor(x, len(g.population(v))) for v, x in shares.items()}

    def short(snap, f, table):
        members = snap.assemblies[f].keys()
        out = []
        for v in sorted(table):
            seats = len(members & snap.graph.population(v))
            if seats < table[v]:
                out.append((f, v, seats, table[v]))
        return out

    checker = _PerCommunity(floors, short)
    found = []
    for t, _, snap in replay(log):
        found += [PFRViolation(t, *x) for x in checker.step(snap)]
    return found


def check_validity(log) -> list[tuple[int, ValidityReport]]:
    """(t, ValidityReport) for every persisting state that is not a valid federation."""
    checker = _PerCommunity(
        lambda snap, f: None,
        lambda snap, f, _: assembly_violations(snap.graph, f, snap.assemblies[f], snap.n),
    )
    bad, version, structural = [], None, []
    for t, _, snap in replay(log):
        g = snap.graph
        if g.version != version:
            version = g.version
            structural = structure_violations(g)
            structural += [
                Violation(ASSEMBLY_MEMBERSHIP, (v,), f"assembly for unknown community {v}")
                for v in sorted(set(snap.assemblies) - g.nodes)
            ]
        found = structural + checker.step(snap)
        if found:
            bad.append((t, ValidityReport(list(found))))
    return bad


def check_colors(log) -> list[tuple[int, str, str]]:
    """Persisting states where a colored seat's holder is outside its color's population."""

    def stray(snap, f, _):
        g = snap.graph
        return [
            (f, p)
            for p, color in sorted(snap.assemblies[f].items())
            if color is not None and (color not in g.children(f) or p not in g.population(color))
        ]

    checker = _PerCommunity(lambda snap, f: None, stray)
    return [(t, *x) for t, _, snap in replay(log) for x in checker.step(snap)]


def check_conservation(log) -> list[str]:
    """Share totals, unit weights and assembly sizes on every persisting state."""

    def shares(snap, f):
        g, n = snap.graph, snap.n
        kids, pop = g.children(f), g.population(f)
        problems = []
        if not kids or not pop:
            return problems
        total = sum(child_shares(g, f, n).values(), Fraction(0))
        if total != n:
            problems.append(f"shares of {f} sum to {total}, not {n}")
        weights = child_weights(g, f)
        if sum(weights.values(), Fraction(0)) != len(pop):
            problems.append(f"child weights of {f} do not sum to |P_f|")
        # per-person weight sums, added up child by child
        k = membership_counts(g, f)
        unit: dict[str, Fraction] = dict.fromkeys(pop, Fraction(0))
        for v in kids:
            for p in g.population(v):
                unit[p] += Fraction(1, k[p])
        for p in sorted(pop):
            if unit[p] != 1:
                problems.append(f"weights of {p} in {f} sum to {unit[p]}")
        return problems

    def sizes(snap, f, structural):
        want = min(len(snap.graph.population(f)), snap.n)
        have = len(snap.assemblies[f])
        return structural + ([f"assembly of {f} has {have} seats, want {want}"] if have != want else [])

    checker = _PerCommunity(shares, sizes)
    return [f"t={t}: {msg}" for t, _, snap in replay(log) for msg in checker.step(snap)]


# -- oracle integration ----------------------------------------------------


class LogIntegrator:
    """Recomputes seat and share integrals by walking the log's constant segments.

    Uses its own tiny graph model (plain dicts and a DFS) so it shares no
    code path with the engine's ledger. Seats are integrated per open seat
    (from its add to its remove); shares per structural epoch. Integration
    can be restricted to times at or after ``start``.
    """

    def __init__(self, log, start: int = 0) -> None:
        self.n = log.header["n"]
        self.start = start
        self.body = log.entries
        self.i = 0
        self.clock = 0
        self.children: dict[str, set[str]] = {}
        self.people: dict[str, set[str]] = {}
        self.seats: dict[str, dict[str, int]] = {}  # f -> {person: open since}
        self.seat: dict[tuple, int] = {}
        self.share: dict[tuple, Fraction] = {}
        self._pops: dict[str, frozenset[str]] = {}
        self._epoch = 0

    def pop(self, v: str) -> frozenset[str]:
        got = self._pops.get(v)
        if got is None:
            out, stack, seen = set(), [v], {v}
            while stack:
                u = stack.pop()
                if not self.children[u]:
                    out |= self.people.get(u, set())
                for w in self.children[u]:
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
            got = self._pops[v] = frozenset(out)
        return got

    def _span(self, a: int, b: int) -> int:
        return max(0, b - max(a, self.start))

    def person_share_rate(self, f: str) -> Fraction:
        size = len(self.pop(f))
        return min(Fraction(self.n, size), Fraction(1)) if size else Fraction(0)

    def child_share_rates(self, f: str) -> dict[str, Fraction]:
        pop, kids = self.pop(f), self.children[f]
        if not pop or not kids:
            return {}
        k: dict[str, int] = {}
        for v in kids:
            for p in self.pop(v):
                k[p] = k.get(p, 0) + 1
        return {v: self.n * sum((Fraction(1, k[p]) for p in self.pop(v)), Fraction(0)) / len(pop) for v in kids}

    def _flush_shares(self, t: int) -> None:
        span = self._span(self._epoch, t)
        self._epoch = t
        if not span:
            return
        for f in self.children:
            rate = self.person_share_rate(f) * span
            if rate:
                for p in self.pop(f):
                    key = (PERSON, p, f)
                    self.share[key] = self.share.get(key, 0) + rate
            for v, r in self.child_share_rates(f).items():
                key = (CHILD, v, f)
                self.share[key] = self.share.get(key, 0) + r * span

    def _close(self, f: str, p: str, t: int) -> None:
        span = self._span(self.seats[f][p], t)
        self.seats[f][p] = t
        if not span:
            return
        key = (PERSON, p, f)
        self.seat[key] = self.seat.get(key, 0) + span
        for v in self.children[f]:
            if p in self.pop(v):
                key = (CHILD, v, f)
                self.seat[key] = self.seat.get(key, 0) + span

    def _close_all(self, t: int) -> None:
        for f, seated in self.seats.items():
            for p in list(seated):
                self._close(f, p, t)

    def _apply(self, e: dict) -> None:
        op, t = e["op"], e["t"]
        if op in STRUCTURAL_OPS:
            self._flush_shares(t)
            self._close_all(t)
            self._pops = {}
        if op == "participate":
            self.children[e["community"]] = set()
            self.people[e["community"]] = {e["person"]}
            self.seats[e["community"]] = {}
        elif op == "federate":
            self.children[e["community"]] = {e["child"]}
            self.seats[e["community"]] = {}
        elif op == "join":
            self.children[e["parent"]].add(e["child"])
        elif op == "leave":
            self.children[e["parent"]].discard(e["child"])
        elif op == "gc":
            v = e["community"]
            del self.children[v]
            self.people.pop(v, None)
            del self.seats[v]
            for kids in self.children.values():
                kids.discard(v)
        elif op == "add":
            self.seats[e["community"]][e["person"]] = t
        elif op == "remove":
            self._close(e["community"], e["person"], t)
            del self.seats[e["community"]][e["person"]]

    def advance(self, t: int) -> LogIntegrator:
        """Bring seat integrals up to ``t``; shares stay pending in the current epoch."""
        if t < self.clock:
            raise ValueError(f"clock regression: {t} < {self.clock}")
        body = self.body
        while self.i < len(body) and body[self.i]["t"] <= t:
            self._apply(body[self.i])
            self.i += 1
        self.clock = t
        self._close_all(t)
        return self

    def integrate_to(self, t: int) -> LogIntegrator:
        self.advance(t)
        self._flush_shares(t)
        return self

    def pending_span(self, t: int) -> int:
        """Share time accrued since the last flush, as seen at ``t``."""
        return self._span(self._epoch, t)

    def totals(self) -> dict[tuple, tuple[int, Fraction]]:
        keys = sorted(set(self.seat) | set(self.share))
        out = {}
        for key in keys:
            s, h = self.seat.get(key, 0), Fraction(self.share.get(key, 0))
            if s or h:
                out[key] = (s, h)
        return out


def oracle_recompute(log, upto: int | None = None, start: int = 0) -> dict[tuple, tuple[int, Fraction]]:
    """Integrals over [start, upto] (default: the whole run) rebuilt from the log."""
    upto = horizon_of(log) if upto is None else upto
    return LogIntegrator(log, start).integrate_to(upto).totals()


# -- eventual checks -------------------------------------------------------


@dataclass
class FairnessReport:
    fst: int
    horizon: int
    epsilon: Fraction
    pfr_violations: list[PFRViolation] = field(default_factory=list)
    eep_gaps: dict[tuple[str, str], Fraction] = field(default_factory=dict)
    efr_deficits: dict[tuple[str, str], Fraction] = field(default_factory=dict)
    child_averages: dict[tuple[str, str], tuple[Fraction, Fraction]] = field(default_factory=dict)

    @property
    def eep_failures(self) -> list[tuple[str, str]]:
        return sorted(k for k, gap in self.eep_gaps.items() if gap > self.epsilon)

    @property
    def efr_failures(self) -> list[tuple[str, str]]:
        return sorted(k for k, gap in self.efr_deficits.items() if gap > self.epsilon)

    def passed(self, pfr: bool = True, eep: bool = True, efr: bool = True) -> bool:
        return not (
            (pfr and self.pfr_violations) or (eep and self.eep_failures) or (efr and self.efr_failures)
        )


def check_convergence(log, fst: int, horizon: int, epsilon: Fraction) -> FairnessReport:
    """Tail averages over [fst, horizon] against the equitable and proportional targets.

    EEP gap per person: |avg seats - min(n/|P_f|, 1)|. EFR deficit per
    child: max(0, avg share - avg seats), reported for parents with
    |P_f| >= n only; below that everybody is seated and the share can
    exceed the child's head count.
    """
    if horizon <= fst:
        raise ValueError(f"horizon {horizon} must be after the stabilization time {fst}")
    walker = LogIntegrator(log, start=fst).integrate_to(horizon)
    n, span = walker.n, horizon - fst
    report = FairnessReport(fst, horizon, Fraction(epsilon))
    for f in sorted(walker.children):
        pop = walker.pop(f)
        if not pop:
            continue
        target = min(Fraction(n, len(pop)), Fraction(1))
        for p in sorted(pop):
            avg = Fraction(walker.seat.get((PERSON, p, f), 0), span)
            report.eep_gaps[(f, p)] = abs(avg - target)
        for v in sorted(walker.children[f]):
            key = (CHILD, v, f)
            avg_seats = Fraction(walker.seat.get(key, 0), span)
            avg_share = Fraction(walker.share.get(key, 0)) / span
            report.child_averages[(f, v)] = (avg_seats, avg_share)
            if len(pop) >= n:
                report.efr_deficits[(f, v)] = max(Fraction(0), avg_share - avg_seats)
    return report


def _person_spread(walker: LogIntegrator, f: str, t: int, base: dict[str, float]) -> Fraction:
    span = walker.pending_span(t)
    rate = walker.person_share_rate(f)
    rate_f = float(rate)
    approx = {}
    for p in walker.pop(f):
        h = base[p] + rate_f * span
        approx[p] = walker.seat.get((PERSON, p, f), 0) / h if h else 1.0

    def exact(p):
        key = (PERSON, p, f)
        return ratio_of(walker.seat.get(key, 0), walker.share.get(key, 0) + rate * span)

    hi, lo = max(approx.values()), min(approx.values())
    tol = 1e-9 * max(1.0, hi)
    top = max(exact(p) for p, a in approx.items() if a >= hi - tol)
    bottom = min(exact(p) for p, a in approx.items() if a <= lo + tol)
    return top - bottom


def ratio_spread_series(
    log, fst: int, horizon: int, tau: int, min_population: int = 2
) -> dict[str, list[Fraction]]:
    """max - min person fairness ratio per community, sampled at fst + k*tau.

    Only communities with at least ``min_population`` people are sampled.
    """
    walker = LogIntegrator(log).integrate_to(fst)
    series: dict[str, list[Fraction]] = {}
    bases: dict[str, dict[str, float]] = {}
    epoch = None
    t = fst
    while t <= horizon:
        walker.advance(t)
        if walker._epoch != epoch:
            # float copies of the flushed shares; refreshed if the structure moves
            epoch = walker._epoch
            bases = {
                f: {p: float(walker.share.get((PERSON, p, f), 0)) for p in walker.pop(f)} for f in walker.children
            }
        for f in sorted(walker.children):
            if len(walker.pop(f)) >= max(2, min_population):
                series.setdefault(f, []).append(_person_spread(walker, f, t, bases[f]))
        t += tau
    return series


def spread_increases(series: dict[str, list[Fraction]], slack: Fraction) -> list[tuple[str, int, Fraction, Fraction]]:
    """(community, k, before, after) wherever the spread grew by more than ``slack``."""
    bad = []
    for f, values in sorted(series.items()):
        for k in range(1, len(values)):
            if values[k] > values[k - 1] + slack:
                bad.append((f, k, values[k - 1], values[k]))
    return bad


def fairness_report(log, epsilon: Fraction, strict_pfr: bool = False) -> FairnessReport:
    fst, horizon = stabilization_time(log), horizon_of(log)
    if horizon > fst:
        report = check_convergence(log, fst, horizon, epsilon)
    else:
        report = FairnessReport(fst, horizon, Fraction(epsilon))
    report.pfr_violations = check_pfr(log, strict=strict_pfr)
    return report
