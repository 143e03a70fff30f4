"""Seeded synthetic scenarios: growth, churn, then a quiet rotation-only tail.

Rates are per-tick probabilities of attempting each event kind. They are
synthetic knobs for exercising the engine, not a model of real grassroots
growth. Every candidate is run through a shadow :class:`Engine`, so the
emitted trace is admissible by construction (and re-validated anyway).
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import trace as tr
from .checks import stabilization_time
from .engine import Engine, EngineConfig
from .errors import ScenarioError, TraceError

# chance that a join attaches a parentless node, so most people end up federated
ORPHAN_BIAS = 0.8


@dataclass
class Growth:
    ticks: int = 100
    participate: float = 0.6
    federate: float = 0.1
    join: float = 0.2


@dataclass
class Churn:
    ticks: int = 50
    leave: float = 0.05
    remove_member: float = 0.1


@dataclass
class ScenarioSpec:
    seed: int = 0
    n: int = 3
    tau: int = 10
    max_persons: int = 50
    max_communities: int = 10
    child_min_pop_enforced: bool = True
    max_children: int | None = None
    growth: Growth = field(default_factory=Growth)
    churn: Churn = field(default_factory=Churn)
    quiet_terms: int = 300

    def __post_init__(self) -> None:
        if isinstance(self.growth, dict):
            self.growth = Growth(**self.growth)
        if isinstance(self.churn, dict):
            self.churn = Churn(**self.churn)
        self.check()

    def check(self) -> None:
        problems = []
        if self.n < 1 or self.tau < 1:
            problems.append("n and tau must be positive")
        if self.max_persons < 0 or self.max_communities < 0:
            problems.append("caps must be non-negative")
        if self.growth.ticks < 0 or self.churn.ticks < 0 or self.quiet_terms < 1:
            problems.append("phase lengths must be non-negative and the quiet tail at least one term")
        rates = {
            "participate": self.growth.participate,
            "federate": self.growth.federate,
            "join": self.growth.join,
            "leave": self.churn.leave,
            "remove_member": self.churn.remove_member,
        }
        for name, r in rates.items():
            if not 0 <= r <= 1:
                problems.append(f"rate {name}={r} is outside [0, 1]")
        if self.growth.participate > 0 and self.max_persons == 0:
            problems.append("participate rate is positive but max_persons is 0")
        if (self.growth.federate > 0 or self.growth.join > 0) and self.max_communities == 0:
            problems.append("federate/join rates are positive but max_communities is 0")
        if self.max_children is not None and self.max_children < 1:
            problems.append("max_children must be at least 1")
        if problems:
            raise ScenarioError("; ".join(problems))

    @classmethod
    def from_dict(cls, data: dict) -> ScenarioSpec:
        try:
            return cls(**data)
        except TypeError as exc:
            raise ScenarioError(f"bad scenario spec: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> ScenarioSpec:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ScenarioError(f"cannot read scenario spec {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ScenarioError("scenario spec must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def engine_config(self, sortition_seed: int | None = None) -> EngineConfig:
        return EngineConfig(
            self.n,
            self.tau,
            child_min_pop_enforced=self.child_min_pop_enforced,
            max_children=self.max_children,
            sortition_seed=sortition_seed,
        )


@dataclass
class Scenario:
    spec: ScenarioSpec
    events: list[tr.TimedEvent]
    fst: int
    horizon: int

    def trace_text(self) -> str:
        header = [
            f"generated scenario seed={self.spec.seed} n={self.spec.n} tau={self.spec.tau}",
            f"fst={self.fst} horizon={self.horizon}",
        ]
        return tr.format_trace(self.events, header)


class _Generator:
    def __init__(self, spec: ScenarioSpec) -> None:
        self.spec = spec
        self.rng = random.Random(spec.seed)
        self.engine = Engine(spec.engine_config())
        self.events: list[tr.TimedEvent] = []
        self.persons = 0
        self.federations = 0
        self.seen: set[str] = set()

    @property
    def g(self):
        return self.engine.graph

    def _try(self, e: tr.TimedEvent) -> bool:
        try:
            self.engine.apply_event(e)
        except TraceError:
            return False
        self.events.append(e)
        self.seen.add(e.kind)
        return True

    def _pick(self, items):
        items = sorted(items)
        return self.rng.choice(items) if items else None

    def _big_enough(self, v: str) -> bool:
        if not self.spec.child_min_pop_enforced or self.g.is_leaf(v):
            return True
        return len(self.g.population(v)) >= self.spec.n + 1

    def participate(self, t: int) -> bool:
        if self.persons >= self.spec.max_persons:
            return False
        self.persons += 1
        return self._try(tr.participate(t, f"p{self.persons:03d}", f"L{self.persons:03d}"))

    def federate(self, t: int) -> bool:
        if self.federations >= self.spec.max_communities:
            return False
        child = self._pick(v for v in self.g.nodes if self._big_enough(v))
        if child is None:
            return False
        self.federations += 1
        return self._try(tr.federate(t, f"F{self.federations:03d}", child))

    def join(self, t: int) -> bool:
        """Attach a child to a federation, preferring nodes that have no parent yet."""
        g = self.g
        parents = [f for f in g.nodes if not g.is_person_leaf(f)]
        cap = self.spec.max_children
        if cap is not None:
            parents = [f for f in parents if len(g.children(f)) < cap]
        f = self._pick(parents)
        if f is None:
            return False
        kids = [
            v
            for v in g.nodes
            if v != f and not g.has_edge(f, v) and not g.would_create_cycle(f, v) and self._big_enough(v)
        ]
        orphans = [v for v in kids if not g.parents(v)]
        if orphans and self.rng.random() < ORPHAN_BIAS:
            kids = orphans
        v = self._pick(kids)
        return v is not None and self._try(tr.join(t, f, v))

    def leave(self, t: int) -> bool:
        edge = self._pick(self.g.edges())
        return edge is not None and self._try(tr.leave(t, *edge))

    def remove_member(self, t: int) -> bool:
        asm = self.engine.state.assemblies
        seat = self._pick((f, p) for f in asm for p in asm[f])
        return seat is not None and self._try(tr.remove_member(t, seat[1], seat[0]))

    def repair(self, t: int) -> None:
        """Detach non-leaf children that fell below n+1 people (enforced mode only)."""
        if not self.spec.child_min_pop_enforced:
            return
        while True:
            bad = [(f, v) for f, v in self.g.edges() if not self._big_enough(v)]
            if not bad:
                return
            if not self._try(tr.leave(t, *bad[0])):
                raise ScenarioError(f"could not detach undersized child {bad[0][1]} at t={t}")

    def phase(self, start: int, ticks: int, rates: dict[str, float]) -> int:
        t = start
        for k in range(ticks):
            t = start + k
            last = k == ticks - 1
            for kind, rate in rates.items():
                # the last tick tries any kind that has not appeared yet
                if rate > 0 and (self.rng.random() < rate or (last and kind not in self.seen)):
                    getattr(self, kind)(t)
                    self.repair(t)
        return t + 1 if ticks else start


def generate(spec: ScenarioSpec, seed: int | None = None) -> Scenario:
    """Build an admissible trace for ``spec`` (``seed`` overrides ``spec.seed``)."""
    if seed is not None:
        spec = ScenarioSpec.from_dict({**spec.to_dict(), "seed": seed})
    gen = _Generator(spec)
    t = gen.phase(1, spec.growth.ticks, {
        "participate": spec.growth.participate,
        "federate": spec.growth.federate,
        "join": spec.growth.join,
    })
    gen.phase(t, spec.churn.ticks, {"leave": spec.churn.leave, "remove_member": spec.churn.remove_member})
    last = gen.events[-1].t if gen.events else 0
    fst = stabilization_time(gen.engine.log)
    horizon = max(fst, last) + spec.quiet_terms * spec.tau
    scenario = Scenario(spec, gen.events, fst, horizon)
    check_admissible(scenario.events, spec.engine_config())
    return scenario


def check_admissible(events, config: EngineConfig) -> None:
    """Replay ``events`` on a fresh engine; raises TraceError at the first bad event."""
    engine = Engine(config)
    for e in events:
        engine.apply_event(e)
