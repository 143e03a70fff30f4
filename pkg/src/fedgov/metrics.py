"""Representation measures and the exact time-integral ledger.

The measure functions take any ``state`` object exposing ``graph``
(a :class:`~fedgov.graph.FederationGraph`), ``assemblies`` (community ->
iterable of seated people) and ``n`` (target assembly size).
"""

from __future__ import annotations

import math
from collections import Counter
from fractions import Fraction

PERSON = "person"
CHILD = "child"


def _require_child(state, v: str, f: str) -> None:
    if v not in state.graph.children(f):
        raise ValueError(f"{v!r} is not a child of {f!r}")


def membership_counts(graph, f: str) -> Counter:
    """For each person in P_f, how many children of ``f`` contain them."""
    counts: Counter = Counter()
    for v in graph.children(f):
        counts.update(graph.population(v))
    return counts


def weight_person(state, p: str, v: str, f: str) -> Fraction:
    _require_child(state, v, f)
    g = state.graph
    if p not in g.population(v):
        return Fraction(0)
    k = sum(1 for u in g.children(f) if p in g.population(u))
    return Fraction(1, k)


def child_weights(graph, f: str) -> dict[str, Fraction]:
    """weight(v, f) for every child v, computed in one sweep."""
    counts = membership_counts(graph, f)
    out = {}
    for v in graph.children(f):
        by_k = Counter(counts[p] for p in graph.population(v))
        out[v] = sum((Fraction(c, k) for k, c in by_k.items()), Fraction(0))
    return out


def weight_child(state, v: str, f: str) -> Fraction:
    _require_child(state, v, f)
    return child_weights(state.graph, f)[v]


def child_shares(graph, f: str, n: int) -> dict[str, Fraction]:
    size = len(graph.population(f))
    if size == 0:
        return {v: Fraction(0) for v in graph.children(f)}
    return {v: n * w / size for v, w in child_weights(graph, f).items()}


def share_child(state, v: str, f: str) -> Fraction:
    _require_child(state, v, f)
    size = len(state.graph.population(f))
    if size == 0:
        raise ValueError(f"population of {f!r} is empty")
    return state.n * weight_child(state, v, f) / size


def person_share_rate(pop_size: int, n: int) -> Fraction:
    if pop_size == 0:
        return Fraction(0)
    return min(Fraction(n, pop_size), Fraction(1))


def share_person(state, p: str, f: str) -> Fraction:
    pop = state.graph.population(f)
    if p not in pop:
        raise ValueError(f"{p!r} is not in the population of {f!r}")
    return person_share_rate(len(pop), state.n)


def representation_floor(share: Fraction, child_size: int) -> int:
    """Persistent seat floor of a child: floor(share), capped by its head count.

    When |P_f| >= n the cap never binds (share <= weight <= |P_v|). Below n
    the raw floor can exceed the child's population, which no assembly could
    ever meet, so the cap keeps the guarantee satisfiable.
    """
    return min(math.floor(share), child_size)


def seats_person(state, p: str, f: str) -> int:
    return 1 if p in set(state.assemblies.get(f, ())) else 0


def seats_child(state, v: str, f: str) -> int:
    members = set(state.assemblies.get(f, ()))
    return len(members & state.graph.population(v))


def seats_now(state, x: str, f: str) -> int:
    """Seats of a child community (if ``x`` is a child of ``f``) or a person."""
    if x in state.graph.children(f):
        return seats_child(state, x, f)
    return seats_person(state, x, f)


class _Acc:
    # Seats and share keep separate clocks: seat changes are frequent and
    # cheap, share rates change only with the structure. The share integral
    # is held as share_num / share_den with share_den a multiple of every
    # rate denominator seen, so accrual and exact ratio comparison stay in
    # plain integers. share_f / share_rate_f are float shadows used only to
    # pre-screen comparisons.
    __slots__ = (
        "seat", "seat_rate", "seat_since",
        "share_num", "share_den", "share_rate", "share_step", "share_since",
        "share_f", "share_rate_f",
    )

    def __init__(self, t: int) -> None:
        self.seat = 0
        self.seat_rate = 0
        self.seat_since = t
        self.share_num = 0
        self.share_den = 1
        self.share_rate = Fraction(0)
        self.share_step = 0  # share_rate * share_den
        self.share_since = t
        self.share_f = 0.0
        self.share_rate_f = 0.0

    def flush_seat(self, t: int) -> None:
        dt = t - self.seat_since
        if dt < 0:
            raise ValueError(f"clock regression: {t} < {self.seat_since}")
        self.seat += self.seat_rate * dt
        self.seat_since = t

    def flush_share(self, t: int) -> None:
        dt = t - self.share_since
        if dt < 0:
            raise ValueError(f"clock regression: {t} < {self.share_since}")
        if dt and self.share_step:
            self.share_num += self.share_step * dt
            self.share_f += self.share_rate_f * dt
        self.share_since = t

    def set_share_rate(self, rate: Fraction) -> None:
        d = rate.denominator
        if self.share_den % d:
            scale = d // math.gcd(self.share_den, d)
            self.share_num *= scale
            self.share_den *= scale
        self.share_rate = rate
        self.share_step = rate.numerator * (self.share_den // d)
        self.share_rate_f = float(rate)

    def seat_at(self, t: int) -> int:
        return self.seat + self.seat_rate * (t - self.seat_since)

    def share_num_at(self, t: int) -> int:
        return self.share_num + self.share_step * (t - self.share_since)

    def share_at(self, t: int) -> Fraction:
        return Fraction(self.share_num_at(t), self.share_den)

    def ratio_pair(self, t: int) -> tuple[int, int]:
        """(a, b) with ratio = a / b and b > 0."""
        h = self.share_num_at(t)
        if not h:
            return 1, 1
        return self.seat_at(t) * self.share_den, h


class MetricsLedger:
    """Exact running integrals of seats and share per (kind, entity, community).

    Values are piecewise constant; each key integrates lazily from the time
    its rates were last set, so a quiet key costs nothing per tick.
    """

    def __init__(self) -> None:
        self._acc: dict[tuple[str, str, str], _Acc] = {}
        self.last_update = 0

    def __contains__(self, key) -> bool:
        return key in self._acc

    def keys(self) -> list[tuple[str, str, str]]:
        return sorted(self._acc)

    def set_rates(self, key, t: int, seat_rate: int | None = None, share_rate: Fraction | None = None) -> None:
        acc = self._acc.get(key)
        if acc is None:
            acc = self._acc[key] = _Acc(t)
        if seat_rate is not None:
            acc.flush_seat(t)
            acc.seat_rate = seat_rate
        if share_rate is not None:
            acc.flush_share(t)
            acc.set_share_rate(Fraction(share_rate))
        if t > self.last_update:
            self.last_update = t

    def rates(self, key) -> tuple[int, Fraction]:
        acc = self._acc.get(key)
        if acc is None:
            return 0, Fraction(0)
        return acc.seat_rate, acc.share_rate

    def seat_integral(self, key, t: int) -> int:
        acc = self._acc.get(key)
        return 0 if acc is None else acc.seat_at(t)

    def share_integral(self, key, t: int) -> Fraction:
        acc = self._acc.get(key)
        return Fraction(0) if acc is None else acc.share_at(t)

    def integrate(self, upto: int) -> MetricsLedger:
        """Extend every integral to ``upto`` under the current rates."""
        if upto < self.last_update:
            raise ValueError(f"clock regression: {upto} < {self.last_update}")
        for acc in self._acc.values():
            acc.flush_seat(upto)
            acc.flush_share(upto)
        self.last_update = upto
        return self

    def ratio(self, key, t: int) -> Fraction:
        a, b = self.ratio_pair(key, t)
        return Fraction(a, b)

    def ratio_pair(self, key, t: int) -> tuple[int, int]:
        """The ratio as an unreduced (numerator, positive denominator) pair."""
        acc = self._acc.get(key)
        return (1, 1) if acc is None else acc.ratio_pair(t)

    def ratio_approx(self, key, t: int) -> float:
        """Float estimate of :meth:`ratio`; relative error far below 1e-9."""
        acc = self._acc.get(key)
        if acc is None:
            return 1.0
        h = acc.share_f + acc.share_rate_f * (t - acc.share_since)
        return (acc.seat + acc.seat_rate * (t - acc.seat_since)) / h if h else 1.0

    def screen(self, kind: str, people, f: str, t: int) -> list[tuple[float, str]]:
        """(ratio_approx, person) for each person; one tight loop for the selection rules."""
        get = self._acc.get
        out = []
        for p in people:
            acc = get((kind, p, f))
            if acc is None:
                out.append((1.0, p))
                continue
            h = acc.share_f + acc.share_rate_f * (t - acc.share_since)
            out.append(((acc.seat + acc.seat_rate * (t - acc.seat_since)) / h if h else 1.0, p))
        return out

    def totals(self, t: int) -> dict[tuple[str, str, str], tuple[int, Fraction]]:
        """All non-zero (seat, share) integrals at time ``t``."""
        out = {}
        for key in sorted(self._acc):
            s, h = self.seat_integral(key, t), self.share_integral(key, t)
            if s or h:
                out[key] = (s, h)
        return out


def ratio_of(seat_integral, share_integral) -> Fraction:
    """Fairness ratio from raw integrals; an entity with no accrued share is neutral."""
    if not share_integral:
        return Fraction(1)
    if not seat_integral:
        return Fraction(0)
    return Fraction(seat_integral) / share_integral


def ratio(ledger: MetricsLedger, x: str, f: str, t: int, kind: str = PERSON) -> Fraction:
    return ledger.ratio((kind, x, f), t)
