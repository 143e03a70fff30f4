"""Federation graph: communities as DAG nodes, leaves holding people.

Ids are plain strings. Their natural string order is the fixed total order
used for deterministic iteration everywhere in the package.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field


class FederationGraph:
    """Directed graph of communities with an edge parent -> child.

    A node created with :meth:`add_leaf` carries a set of people. Populations
    are derived (never stored by the caller) and cached per structural
    version; every mutator bumps :attr:`version`.
    """

    def __init__(self) -> None:
        self._children: dict[str, set[str]] = {}
        self._parents: dict[str, set[str]] = {}
        self._members: dict[str, frozenset[str]] = {}
        self.version = 0
        self._cache_version = -1
        self._pop_cache: dict[str, frozenset[str]] = {}
        self._topo_cache: list[str] | None = None

    # -- queries -------------------------------------------------------

    @property
    def nodes(self) -> frozenset[str]:
        return frozenset(self._children)

    def __contains__(self, v: object) -> bool:
        return v in self._children

    def __len__(self) -> int:
        return len(self._children)

    def edges(self) -> list[tuple[str, str]]:
        return sorted((f, v) for f, cs in self._children.items() for v in cs)

    def has_edge(self, f: str, v: str) -> bool:
        return f in self._children and v in self._children[f]

    def _check(self, v: str) -> None:
        if v not in self._children:
            raise KeyError(f"unknown community {v!r}")

    def children(self, f: str) -> frozenset[str]:
        self._check(f)
        return frozenset(self._children[f])

    def parents(self, v: str) -> frozenset[str]:
        self._check(v)
        return frozenset(self._parents[v])

    def is_leaf(self, v: str) -> bool:
        self._check(v)
        return not self._children[v]

    def is_person_leaf(self, v: str) -> bool:
        return v in self._members

    def leaf_members(self, v: str) -> frozenset[str]:
        """People held directly by ``v``; empty for interior or emptied nodes."""
        self._check(v)
        if self._children[v]:
            return frozenset()
        return self._members.get(v, frozenset())

    def leaves(self) -> list[str]:
        return sorted(v for v, cs in self._children.items() if not cs)

    def population(self, v: str) -> frozenset[str]:
        if self._cache_version == self.version:
            got = self._pop_cache.get(v)
            if got is not None:
                return got
        self._check(v)
        return self._populations()[v]

    def populations(self) -> Mapping[str, frozenset[str]]:
        return self._populations()

    def reachable(self, src: str, dst: str) -> bool:
        """True iff a directed path src -> ... -> dst exists (src reaches itself)."""
        self._check(src)
        self._check(dst)
        stack, seen = [src], {src}
        while stack:
            u = stack.pop()
            if u == dst:
                return True
            for w in self._children[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return False

    def would_create_cycle(self, f: str, v: str) -> bool:
        """Adding f -> v closes a cycle iff f is reachable from v."""
        return self.reachable(v, f)

    def ancestors(self, v: str) -> set[str]:
        self._check(v)
        out: set[str] = set()
        stack = [v]
        while stack:
            for p in self._parents[stack.pop()]:
                if p not in out:
                    out.add(p)
                    stack.append(p)
        return out

    def find_cycle(self) -> list[str] | None:
        """Return the nodes of some directed cycle, or None if acyclic."""
        color: dict[str, int] = {}
        for root in sorted(self._children):
            if root in color:
                continue
            color[root] = 1
            path = [root]
            stack = [iter(sorted(self._children[root]))]
            while stack:
                nxt = next(stack[-1], None)
                if nxt is None:
                    color[path.pop()] = 2
                    stack.pop()
                    continue
                state = color.get(nxt, 0)
                if state == 1:
                    return path[path.index(nxt):]
                if state == 0:
                    color[nxt] = 1
                    path.append(nxt)
                    stack.append(iter(sorted(self._children[nxt])))
        return None

    def topological_order(self) -> list[str]:
        """Children before parents; ties by id. Requires an acyclic graph."""
        self._refresh()
        if self._topo_cache is None:
            if self.find_cycle() is not None:
                raise ValueError("graph has a cycle")
            height: dict[str, int] = {}
            for root in sorted(self._children):
                if root in height:
                    continue
                stack = [(root, False)]
                while stack:
                    u, done = stack.pop()
                    if done:
                        height[u] = 1 + max((height[c] for c in self._children[u]), default=-1)
                        continue
                    if u in height:
                        continue
                    stack.append((u, True))
                    for c in self._children[u]:
                        if c not in height:
                            stack.append((c, False))
            self._topo_cache = sorted(self._children, key=lambda u: (height[u], u))
        return self._topo_cache

    # -- mutation ------------------------------------------------------

    def _touch(self) -> None:
        self.version += 1

    def add_leaf(self, v: str, people: Iterable[str]) -> None:
        if v in self._children:
            raise ValueError(f"community {v!r} already exists")
        self._children[v] = set()
        self._parents[v] = set()
        self._members[v] = frozenset(people)
        self._touch()

    def add_node(self, v: str) -> None:
        if v in self._children:
            raise ValueError(f"community {v!r} already exists")
        self._children[v] = set()
        self._parents[v] = set()
        self._touch()

    def add_edge(self, f: str, v: str) -> None:
        """Insert f -> v without any admissibility check (see the engine for those)."""
        self._check(f)
        self._check(v)
        if v in self._children[f]:
            raise ValueError(f"edge {f}->{v} already exists")
        self._children[f].add(v)
        self._parents[v].add(f)
        self._touch()

    def remove_edge(self, f: str, v: str) -> None:
        if not self.has_edge(f, v):
            raise KeyError(f"no edge {f}->{v}")
        self._children[f].discard(v)
        self._parents[v].discard(f)
        self._touch()

    def remove_node(self, v: str) -> None:
        """Remove ``v`` and all incident edges."""
        self._check(v)
        for c in self._children.pop(v):
            self._parents[c].discard(v)
        for p in self._parents.pop(v):
            self._children[p].discard(v)
        self._members.pop(v, None)
        self._touch()

    def copy(self) -> FederationGraph:
        g = FederationGraph()
        g._children = {k: set(s) for k, s in self._children.items()}
        g._parents = {k: set(s) for k, s in self._parents.items()}
        g._members = dict(self._members)
        g.version = self.version
        return g

    # -- caches --------------------------------------------------------

    def _refresh(self) -> None:
        if self._cache_version != self.version:
            self._pop_cache = {}
            self._topo_cache = None
            self._cache_version = self.version

    def _populations(self) -> dict[str, frozenset[str]]:
        self._refresh()
        if len(self._pop_cache) != len(self._children):
            if self.find_cycle() is None:
                pops: dict[str, frozenset[str]] = {}
                for u in self.topological_order():
                    cs = self._children[u]
                    if not cs:
                        pops[u] = self._members.get(u, frozenset())
                    else:
                        pops[u] = frozenset().union(*(pops[c] for c in cs))
            else:
                pops = {u: self._reach_leaves(u) for u in self._children}
            self._pop_cache = pops
        return self._pop_cache

    def _reach_leaves(self, v: str) -> frozenset[str]:
        out: set[str] = set()
        stack, seen = [v], {v}
        while stack:
            u = stack.pop()
            if not self._children[u]:
                out |= self._members.get(u, frozenset())
            for w in self._children[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return frozenset(out)


def children(g: FederationGraph, f: str) -> frozenset[str]:
    return g.children(f)


def population(g: FederationGraph, v: str) -> frozenset[str]:
    return g.population(v)


def would_create_cycle(g: FederationGraph, f: str, v: str) -> bool:
    g._check(f)
    g._check(v)
    return g.would_create_cycle(f, v)


CYCLE = "cycle"
LEAF_OVERLAP = "leaf-overlap"
ASSEMBLY_MEMBERSHIP = "assembly-membership"
ASSEMBLY_SIZE = "assembly-size"


@dataclass(frozen=True)
class Violation:
    kind: str
    ids: tuple[str, ...]
    detail: str


@dataclass
class ValidityReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}


def structure_violations(g: FederationGraph) -> list[Violation]:
    """Cycles and people held by more than one leaf."""
    out = []
    cycle = g.find_cycle()
    if cycle is not None:
        out.append(Violation(CYCLE, tuple(cycle), "directed cycle " + " -> ".join(cycle + cycle[:1])))
    owner: dict[str, str] = {}
    for leaf in g.leaves():
        for p in sorted(g.leaf_members(leaf)):
            if p in owner:
                out.append(Violation(LEAF_OVERLAP, (owner[p], leaf, p), f"{p} is in leaves {owner[p]} and {leaf}"))
            else:
                owner[p] = leaf
    return out


def assembly_violations(g: FederationGraph, v: str, seated: Iterable[str], n: int) -> list[Violation]:
    """Assembly of ``v`` must be min(|P_v|, n) distinct members of P_v."""
    out = []
    pop = g.population(v)
    seated = list(seated)
    outsiders = sorted(set(seated) - pop)
    if outsiders:
        out.append(Violation(ASSEMBLY_MEMBERSHIP, (v, *outsiders), f"{v} seats non-members {outsiders}"))
    want = min(len(pop), n)
    if len(set(seated)) != want or len(seated) != len(set(seated)):
        out.append(Violation(ASSEMBLY_SIZE, (v,), f"{v} has {len(seated)} seats, expected {want}"))
    return out


def validate(g: FederationGraph, assemblies: Mapping[str, Iterable[str]], n: int) -> ValidityReport:
    """Check acyclicity, leaf disjointness, and assembly membership and size.

    ``assemblies`` maps a community to an iterable of seated people; a
    community without an entry is treated as having an empty assembly.
    """
    report = ValidityReport(structure_violations(g))
    for v in sorted(set(assemblies) - g.nodes):
        report.violations.append(Violation(ASSEMBLY_MEMBERSHIP, (v,), f"assembly for unknown community {v}"))
    for v in sorted(g.nodes):
        report.violations += assembly_violations(g, v, assemblies.get(v, ()), n)
    return report
