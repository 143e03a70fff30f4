"""The timed federation transition system driven by the greedy fair protocol.

External events move the clock forward and change structure; every event
is followed, at the same timestamp, by a maintenance burst that runs the
priority rules to a fixpoint. Term rotations fire between events.
"""

from __future__ import annotations

import hashlib
import heapq
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import trace as tr
from .errors import InternalError, TraceError
from .graph import FederationGraph
from .metrics import CHILD, PERSON, MetricsLedger, child_shares, person_share_rate, ratio_of, representation_floor
from .policy import (
    UNCOLORED,
    ColoredAssembly,
    Seat,
    select_addition_A1,
    select_addition_A2,
    select_removal_R1,
    select_removal_R2,
    select_rotation_R3,
)

LOG_FORMAT = "fedgov-runlog/1"

# one pass of the maintenance burst, in this order
PURGE, GC, R1, R2, A1, A2 = "purge", "gc", "R1", "R2", "A1", "A2"
BURST_ORDER = (PURGE, GC, R1, R2, A1, A2)


@dataclass
class EngineConfig:
    n: int
    tau: int
    child_min_pop_enforced: bool = False
    max_children: int | None = None
    sortition_seed: int | None = None
    step_bound: int | None = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("assembly size n must be >= 1")
        if self.tau < 1:
            raise ValueError("term length tau must be >= 1")
        self._order_cache: dict[str, tuple] = {}

    def order_key(self, person: str):
        """Position of ``person`` in the fixed tie-breaking order."""
        if self.sortition_seed is None:
            return person
        key = self._order_cache.get(person)
        if key is None:
            digest = hashlib.sha256(f"{self.sortition_seed}:{person}".encode()).hexdigest()
            key = self._order_cache[person] = (digest, person)
        return key

    def header(self) -> dict:
        return {
            "format": LOG_FORMAT,
            "n": self.n,
            "tau": self.tau,
            "child_min_pop_enforced": self.child_min_pop_enforced,
            "max_children": self.max_children,
            "sortition_seed": self.sortition_seed,
        }


@dataclass
class EngineState:
    graph: FederationGraph
    assemblies: dict[str, ColoredAssembly]
    now: int
    ledger: MetricsLedger
    config: EngineConfig
    _floors: dict = field(default_factory=dict, repr=False)
    _positive: dict = field(default_factory=dict, repr=False)
    _floors_version: int = field(default=-1, repr=False)

    @property
    def n(self) -> int:
        return self.config.n

    @property
    def tau(self) -> int:
        return self.config.tau

    def order_key(self, person: str):
        return self.config.order_key(person)

    def ratio(self, person: str, f: str) -> Fraction:
        return self.ledger.ratio((PERSON, person, f), self.now)

    def ratio_pair(self, person: str, f: str) -> tuple[int, int]:
        return self.ledger.ratio_pair((PERSON, person, f), self.now)

    def ratio_approx(self, person: str, f: str) -> float:
        return self.ledger.ratio_approx((PERSON, person, f), self.now)

    def screen(self, people, f: str) -> list[tuple[float, str]]:
        return self.ledger.screen(PERSON, people, f, self.now)

    def floors(self, f: str) -> dict[str, int]:
        """Persistent colored-seat floor for each child of ``f``."""
        if self._floors_version != self.graph.version:
            self._floors = {}
            self._positive = {}
            self._floors_version = self.graph.version
        out = self._floors.get(f)
        if out is None:
            g = self.graph
            shares = child_shares(g, f, self.n)
            out = self._floors[f] = {v: representation_floor(s, len(g.population(v))) for v, s in shares.items()}
        return out

    def positive_floors(self, f: str) -> list[tuple[str, int]]:
        """(child, floor) for children with a non-zero floor, by child id."""
        floors = self.floors(f)
        out = self._positive.get(f)
        if out is None:
            out = self._positive[f] = [(v, floors[v]) for v in sorted(floors) if floors[v]]
        return out

    def to_dict(self) -> dict:
        g = self.graph
        return {
            "now": self.now,
            "n": self.n,
            "tau": self.tau,
            "communities": sorted(g.nodes),
            "edges": [list(e) for e in g.edges()],
            "leaves": {v: sorted(g.leaf_members(v)) for v in g.leaves()},
            "populations": {v: sorted(g.population(v)) for v in sorted(g.nodes)},
            "assemblies": {
                f: [{"person": s.person, "color": s.color, "start": s.start} for s in self.assemblies[f].seats()]
                for f in sorted(self.assemblies)
            },
        }


@dataclass
class RunLog:
    """Header plus a flat list of entries (external events and maintenance actions)."""

    header: dict = field(default_factory=dict)
    entries: list[dict] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def to_jsonl(self) -> str:
        lines = [json.dumps({"op": "header", **self.header}, sort_keys=True)]
        lines += [json.dumps(e, sort_keys=True) for e in self.entries]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> RunLog:
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows or rows[0].get("op") != "header":
            raise ValueError("run log has no header line")
        header = dict(rows[0])
        header.pop("op")
        return cls(header, rows[1:])

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")

    @classmethod
    def read(cls, path: str | Path) -> RunLog:
        return cls.from_jsonl(Path(path).read_text(encoding="utf-8"))


class Engine:
    """Single-threaded step loop over one federation run."""

    def __init__(self, config: EngineConfig) -> None:
        self.config = config
        self.state = EngineState(FederationGraph(), {}, 0, MetricsLedger(), config)
        self.log = RunLog(header=config.header())
        self.samples: list[tuple] = []
        self._used_ids: set[str] = set()
        self._person_leaf: dict[str, str] = {}
        self._heap: list[tuple[int, str, str, int]] = []
        self._active: dict[str, set] = {}
        self._warned: set[tuple[str, str]] = set()
        self._stale: set[str] = set()  # communities whose seats may need purging

    # -- shorthands ----------------------------------------------------

    @property
    def graph(self) -> FederationGraph:
        return self.state.graph

    @property
    def now(self) -> int:
        return self.state.now

    def _emit(self, op: str, **fields) -> dict:
        entry = {"seq": len(self.log.entries), "t": self.state.now, "op": op, **fields}
        self.log.entries.append(entry)
        return entry

    # -- ledger rates --------------------------------------------------

    def _resync(self, communities) -> None:
        """Recompute every rate of the given communities from scratch."""
        g, st, led, t = self.graph, self.state, self.state.ledger, self.state.now
        for f in sorted(communities):
            old = self._active.pop(f, set())
            if f not in g:
                for key in sorted(old):
                    led.set_rates(key, t, 0, Fraction(0))
                continue
            pop = g.population(f)
            members = st.assemblies[f].members
            rate = person_share_rate(len(pop), st.n)
            new = set()
            for p in sorted(pop):
                key = (PERSON, p, f)
                new.add(key)
                seat = 1 if p in members else 0
                if led.rates(key) != (seat, rate):
                    led.set_rates(key, t, seat, rate)
            for v, share in sorted(child_shares(g, f, st.n).items()):
                key = (CHILD, v, f)
                new.add(key)
                seats = len(members & g.population(v))
                if led.rates(key) != (seats, share):
                    led.set_rates(key, t, seats, share)
            for key in sorted(old - new):
                led.set_rates(key, t, 0, Fraction(0))
            self._active[f] = new

    def _seat_changed(self, f: str, p: str) -> None:
        g, led, t = self.graph, self.state.ledger, self.state.now
        members = self.state.assemblies[f].members
        if p in g.population(f):
            led.set_rates((PERSON, p, f), t, seat_rate=1 if p in members else 0)
        for v in sorted(g.children(f)):
            pv = g.population(v)
            if p in pv:
                led.set_rates((CHILD, v, f), t, seat_rate=len(members & pv))

    # -- seat and node primitives --------------------------------------

    def _add_seat(self, f: str, p: str, color: str | None, rule: str) -> None:
        t = self.state.now
        self.state.assemblies[f].add(Seat(p, color, t))
        self._emit("add", community=f, person=p, color=color, rule=rule)
        self._seat_changed(f, p)
        heapq.heappush(self._heap, (t + self.config.tau, f, p, t))

    def _remove_seat(self, f: str, p: str, rule: str) -> Seat:
        seat = self.state.assemblies[f].remove(p)
        self._emit("remove", community=f, person=p, color=seat.color, rule=rule)
        self._seat_changed(f, p)
        return seat

    def _structure_changed(self, communities) -> None:
        self._stale |= set(communities)
        self._resync(communities)
        self._rebuild_heap()

    def _rebuild_heap(self) -> None:
        tau = self.config.tau
        self._heap = [
            (s.start + tau, f, s.person, s.start) for f, asm in self.state.assemblies.items() for s in asm.seats()
        ]
        heapq.heapify(self._heap)

    def _purge(self, f: str) -> bool:
        """Drop seats whose holder left P_f or whose color no longer fits."""
        if f not in self._stale:
            return False
        self._stale.discard(f)
        g = self.graph
        pop = g.population(f)
        kids = g.children(f)
        fired = False
        for s in self.state.assemblies[f].seats():
            stale = s.person not in pop or (
                s.color is not None and (s.color not in kids or s.person not in g.population(s.color))
            )
            if stale:
                self._remove_seat(f, s.person, PURGE)
                fired = True
        return fired

    def _garbage_collect(self, v: str) -> set[str]:
        g = self.graph
        affected = g.ancestors(v)
        self._emit("gc", community=v)
        for p in g.leaf_members(v):
            if self._person_leaf.get(p) == v:
                del self._person_leaf[p]
        g.remove_node(v)
        del self.state.assemblies[v]
        self._structure_changed(affected | {v})
        for f in g.topological_order():
            if f in affected:
                self._purge(f)
        return affected

    # -- maintenance ---------------------------------------------------

    def maintenance_fixpoint(self, dirty=None) -> None:
        """Apply purge, GC, R1, R2, A1, A2 at the current time until none fires.

        ``dirty`` limits the first pass to those communities; a community is
        revisited only after something about it changed.
        """
        g, st = self.graph, self.state
        todo = set(g.nodes) if dirty is None else {f for f in dirty if f in g}
        touched = set(todo)
        bound = self.config.step_bound or 10 * max(1, len(g)) * (st.n + 2)
        steps = 0
        self._warned = set()
        while todo:
            again: set[str] = set()
            for f in [f for f in g.topological_order() if f in todo]:
                # highest-priority applicable rule first, then start over
                while f in g and self._step(f, again):
                    steps += 1
                    if steps > bound:
                        raise InternalError(f"maintenance did not reach a fixpoint after {bound} steps at t={st.now}")
            todo = {f for f in again if f in g}
            touched |= todo
        self._check_local(touched)

    def _step(self, f: str, again: set[str]) -> bool:
        g, st = self.graph, self.state
        for rule in BURST_ORDER:
            if rule == PURGE:
                fired = self._purge(f)
            elif rule == GC:
                fired = g.is_leaf(f) and not len(st.assemblies[f])
                if fired:
                    again |= self._garbage_collect(f)
                    return False
            elif rule == R1:
                seat = select_removal_R1(f, st)
                fired = seat is not None
                if fired:
                    self._remove_seat(f, seat.person, R1)
            elif rule == R2:
                seat = select_removal_R2(f, st)
                fired = seat is not None
                if fired:
                    self._remove_seat(f, seat.person, R2)
            elif rule == A1:
                pick = select_addition_A1(f, st, warn=lambda v: self._warn(f, v))
                fired = pick is not None
                if fired:
                    self._add_seat(f, pick[0], pick[1], A1)
            else:
                p = select_addition_A2(f, st)
                fired = p is not None
                if fired:
                    self._add_seat(f, p, UNCOLORED, A2)
            if fired:
                return True
        return False

    def _warn(self, f: str, v: str) -> None:
        if (f, v) not in self._warned:
            self._warned.add((f, v))
            self._emit("warn", community=f, child=v, reason="no eligible person for a colored seat")

    def _check_local(self, communities) -> None:
        g, st = self.graph, self.state
        for f in sorted(communities):
            if f not in g:
                continue
            pop, asm = g.population(f), st.assemblies[f]
            if not asm.members <= pop or len(asm) != min(len(pop), st.n):
                raise InternalError(f"invalid assembly for {f} at t={st.now}: {asm.seats()}")

    # -- time ----------------------------------------------------------

    def _due_entry_valid(self, f: str, p: str, start: int) -> bool:
        asm = self.state.assemblies.get(f)
        if asm is None:
            return False
        seat = asm.seat_of(p)
        return seat is not None and seat.start == start and len(self.graph.population(f)) > self.config.n

    def _next_due(self) -> int | None:
        while self._heap:
            due, f, p, start = self._heap[0]
            if self._due_entry_valid(f, p, start):
                return max(due, self.state.now)
            heapq.heappop(self._heap)
        return None

    def _rotate_at(self, t: int) -> None:
        due_fs = set()
        while self._heap and self._heap[0][0] <= t:
            _, f, p, start = heapq.heappop(self._heap)
            if self._due_entry_valid(f, p, start):
                due_fs.add(f)
        for f in [f for f in self.graph.topological_order() if f in due_fs]:
            while f in self.graph:
                seat = select_rotation_R3(f, self.state, t)
                if seat is None:
                    break
                self._remove_seat(f, seat.person, "R3")
                self.maintenance_fixpoint({f})

    def advance_to(self, t: int) -> None:
        """Fire every term expiry due at or before ``t`` in time order, then set the clock."""
        if t < self.state.now:
            raise ValueError(f"clock regression: {t} < {self.state.now}")
        while True:
            nxt = self._next_due()
            if nxt is None or nxt > t:
                break
            self.state.now = nxt
            self._rotate_at(nxt)
        self.state.now = t

    # -- external events -----------------------------------------------

    def _fail(self, e: tr.TimedEvent, message: str, clause: str) -> TraceError:
        return TraceError(f"{e.describe()}: {message}", line=e.line, event=e, clause=clause)

    def _need_node(self, e, v: str) -> None:
        if v not in self.graph:
            raise self._fail(e, f"unknown community {v}", "community exists")

    def _need_fresh(self, e, v: str) -> None:
        if v in self._used_ids:
            raise self._fail(e, f"community id {v} was already used", "fresh community id")

    def _check_child_size(self, e, v: str) -> None:
        g = self.graph
        if self.config.child_min_pop_enforced and not g.is_leaf(v):
            if len(g.population(v)) < self.config.n + 1:
                raise self._fail(
                    e,
                    f"non-leaf child {v} has {len(g.population(v))} people",
                    "non-leaf child population at least n+1",
                )

    def apply_event(self, e: tr.TimedEvent) -> list[dict]:
        """Apply one external event and its maintenance burst; return the new log entries."""
        if e.t < self.state.now:
            raise TraceError(
                f"clock regression: {e.describe()} after t={self.state.now}",
                line=e.line,
                event=e,
                clause="non-decreasing clock",
            )
        self.advance_to(e.t)
        start = len(self.log.entries)
        g, st = self.graph, self.state
        if e.kind == tr.PARTICIPATE:
            self._need_fresh(e, e.community)
            if e.person in self._person_leaf:
                raise self._fail(
                    e,
                    f"{e.person} already belongs to leaf {self._person_leaf[e.person]}",
                    "provided p is not in any existing leaf population",
                )
            self._emit(e.kind, **e.ids())
            g.add_leaf(e.community, [e.person])
            self._used_ids.add(e.community)
            self._person_leaf[e.person] = e.community
            st.assemblies[e.community] = ColoredAssembly(e.community)
            self._structure_changed({e.community})
            self._add_seat(e.community, e.person, UNCOLORED, "init")
            dirty = {e.community}
        elif e.kind == tr.FEDERATE:
            self._need_node(e, e.child)
            self._need_fresh(e, e.community)
            self._check_child_size(e, e.child)
            self._emit(e.kind, **e.ids())
            g.add_node(e.community)
            g.add_edge(e.community, e.child)
            self._used_ids.add(e.community)
            st.assemblies[e.community] = ColoredAssembly(e.community)
            self._structure_changed({e.community})
            for p in st.assemblies[e.child]:
                self._add_seat(e.community, p, e.child, "copy")
            dirty = {e.community}
        elif e.kind == tr.JOIN:
            f, v = e.parent, e.child
            self._need_node(e, f)
            self._need_node(e, v)
            if g.is_person_leaf(f):
                raise self._fail(e, f"{f} is a person's leaf", "parent is not a person leaf")
            if g.has_edge(f, v):
                raise self._fail(e, f"edge {f}->{v} already exists", "edge not already present")
            if f == v or g.would_create_cycle(f, v):
                raise self._fail(e, f"{f} is reachable from {v}", "the result is acyclic")
            cap = self.config.max_children
            if cap is not None and len(g.children(f)) >= cap:
                raise self._fail(e, f"{f} already has {cap} children", "children limit")
            self._check_child_size(e, v)
            self._emit(e.kind, **e.ids())
            g.add_edge(f, v)
            dirty = g.ancestors(f) | {f}
            self._structure_changed(dirty)
        elif e.kind == tr.LEAVE:
            f, v = e.parent, e.child
            if not g.has_edge(f, v):
                raise self._fail(e, f"no edge {f}->{v}", "edge exists")
            self._emit(e.kind, **e.ids())
            g.remove_edge(f, v)
            dirty = g.ancestors(f) | {f}
            self._structure_changed(dirty)
            for s in st.assemblies[f].colored(v):
                self._remove_seat(f, s.person, "leave")
        elif e.kind == tr.REMOVE_MEMBER:
            self._need_node(e, e.community)
            if e.person not in st.assemblies[e.community]:
                raise self._fail(e, f"{e.person} holds no seat in {e.community}", "p seated in f")
            self._emit(e.kind, **e.ids())
            self._remove_seat(e.community, e.person, "event")
            dirty = {e.community}
        else:  # pragma: no cover - parse_line rejects unknown kinds
            raise TraceError(f"unknown event kind {e.kind}", line=e.line)
        self.maintenance_fixpoint(dirty)
        return self.log.entries[start:]

    # -- whole runs ----------------------------------------------------

    def sample(self, t: int) -> None:
        """Record (t, community, entity, kind, avg seats, avg share, ratio) for active entities."""
        led = self.state.ledger
        for f in sorted(self._active):
            for key in sorted(self._active[f]):
                s, h = led.seat_integral(key, t), led.share_integral(key, t)
                self.samples.append((t, f, key[1], key[0], Fraction(s, t), h / t, ratio_of(s, h)))

    def run(self, events, horizon: int, checkpoints=()) -> RunLog:
        """Apply ``events`` in order, then let rotations run until ``horizon``."""
        events = list(events)
        if events and horizon < events[-1].t:
            raise ValueError(f"horizon {horizon} precedes the last event at t={events[-1].t}")
        pending = sorted(c for c in set(checkpoints) if 0 < c <= horizon)
        pending.reverse()
        for e in events:
            while pending and pending[-1] <= e.t:
                c = pending.pop()
                self.advance_to(c)
                self.sample(c)
            self.apply_event(e)
        while pending:
            c = pending.pop()
            self.advance_to(c)
            self.sample(c)
        self.advance_to(horizon)
        self.log.header["horizon"] = horizon
        return self.log


def run_trace(events, config: EngineConfig, horizon: int, checkpoints=()) -> tuple[Engine, RunLog]:
    engine = Engine(config)
    log = engine.run(events, horizon, checkpoints)
    return engine, log
