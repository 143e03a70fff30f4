"""Colored assemblies and the greedy selection rules.

Removals (R1-R3) take the seat whose holder has the largest fairness ratio;
additions (A1, A2) take the eligible person with the smallest. Ties go to
the person first in the run's fixed order. Children are scanned by id.

The selection functions only read ``state``; they expect ``graph``,
``assemblies``, ``n``, ``tau``, ``ratio_pair(p, f)`` (the exact ratio as
an (a, b) pair), ``screen(people, f)`` (float estimates), ``order_key(p)``,
``floors(f)`` and ``positive_floors(f)`` on it (see :class:`fedgov.engine.EngineState`).
"""

from __future__ import annotations

from collections.abc import Callable, Iterable, Iterator
from dataclasses import dataclass

UNCOLORED = None


@dataclass(frozen=True)
class Seat:
    person: str
    color: str | None
    start: int


class ColoredAssembly:
    """Seats of one community; at most one seat per person."""

    def __init__(self, owner: str, seats: Iterable[Seat] = ()) -> None:
        self.owner = owner
        self._seats: dict[str, Seat] = {}
        self._by_color: dict[str | None, int] = {}
        for s in seats:
            self.add(s)

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self._seats))

    def __len__(self) -> int:
        return len(self._seats)

    def __contains__(self, person: object) -> bool:
        return person in self._seats

    def __repr__(self) -> str:
        return f"ColoredAssembly({self.owner!r}, {self.seats()!r})"

    @property
    def members(self) -> frozenset[str]:
        return frozenset(self._seats)

    def seat_of(self, person: str) -> Seat | None:
        return self._seats.get(person)

    def seats(self) -> list[Seat]:
        return [self._seats[p] for p in sorted(self._seats)]

    def colored(self, color: str | None) -> list[Seat]:
        return [s for s in self.seats() if s.color == color]

    def colors(self) -> list[str]:
        """Children holding at least one colored seat, by id."""
        return sorted(c for c in self._by_color if c is not None)

    def count(self, color: str | None) -> int:
        return self._by_color.get(color, 0)

    def add(self, seat: Seat) -> None:
        if seat.person in self._seats:
            raise ValueError(f"{seat.person} already holds a seat in {self.owner}")
        self._seats[seat.person] = seat
        self._by_color[seat.color] = self._by_color.get(seat.color, 0) + 1

    def remove(self, person: str) -> Seat:
        seat = self._seats.pop(person)
        self._by_color[seat.color] -= 1
        if not self._by_color[seat.color]:
            del self._by_color[seat.color]
        return seat

    def copy(self) -> ColoredAssembly:
        return ColoredAssembly(self.owner, self._seats.values())


# float ratios within this relative distance of the best are re-ranked exactly
SCREEN_TOLERANCE = 1e-9


def _extreme(state, f: str, people: Iterable[str], sign: int) -> str | None:
    """Person minimising (sign * ratio, order); ratios are screened in floats first."""
    scored = state.screen(people, f)
    if not scored:
        return None
    if sign < 0:
        scored = [(-a, p) for a, p in scored]
    best = min(scored)[0]
    if best == 0.0:
        # a zero estimate means a zero seat integral, so the ratio is exactly 0
        return min((p for a, p in scored if a == 0.0), key=state.order_key)
    cut = best + SCREEN_TOLERANCE * max(1.0, abs(best))
    near = [p for a, p in scored if a <= cut]
    if len(near) == 1:
        return near[0]
    # exact comparison of a/b ratios by cross-multiplication (b > 0)
    pairs = [(state.ratio_pair(p, f), p) for p in near]
    (ba, bb), _ = pairs[0]
    for (a, b), _ in pairs:
        if sign * (a * bb - ba * b) < 0:
            ba, bb = a, b
    return min((p for (a, b), p in pairs if a * bb == ba * b), key=state.order_key)


def _most_over(state, f: str, seats: list[Seat]) -> Seat | None:
    p = _extreme(state, f, (s.person for s in seats), -1)
    return None if p is None else state.assemblies[f].seat_of(p)


def _most_under(state, f: str, people: Iterable[str]) -> str | None:
    return _extreme(state, f, people, 1)


def select_removal_R1(f: str, state) -> Seat | None:
    """Excess colored seat: a child holding more colored seats than its floor."""
    asm = state.assemblies[f]
    floors = state.floors(f)
    for v in asm.colors():
        if asm.count(v) > floors.get(v, 0):
            return _most_over(state, f, asm.colored(v))
    return None


def select_removal_R2(f: str, state) -> Seat | None:
    """Excess uncolored seat: more than n seats in total."""
    asm = state.assemblies[f]
    if len(asm) <= state.n:
        return None
    return _most_over(state, f, asm.colored(UNCOLORED))


def select_rotation_R3(f: str, state, now: int) -> Seat | None:
    """A seat that has served at least one term.

    Communities with |P_f| <= n seat everybody, so rotating there could only
    re-seat the same person (and would garbage-collect singleton leaves);
    they are exempt.
    """
    if len(state.graph.population(f)) <= state.n:
        return None
    due = [s for s in state.assemblies[f].seats() if now - s.start >= state.tau]
    return _most_over(state, f, due)


def select_addition_A1(
    f: str, state, warn: Callable[[str], None] | None = None
) -> tuple[str, str] | None:
    """Fill a colored seat for the first child (by id) below its floor.

    Children below floor with nobody left to seat are reported through
    ``warn`` and skipped.
    """
    asm = state.assemblies[f]
    for v, floor in state.positive_floors(f):
        if asm.count(v) < floor:
            members = asm.members
            eligible = [p for p in state.graph.population(v) if p not in members]
            if eligible:
                return _most_under(state, f, eligible), v
            if warn is not None:
                warn(v)
    return None


def select_addition_A2(f: str, state) -> str | None:
    """Fill an uncolored seat while the assembly is below min(|P_f|, n)."""
    asm = state.assemblies[f]
    pop = state.graph.population(f)
    if len(asm) >= min(len(pop), state.n):
        return None
    members = asm.members
    return _most_under(state, f, (p for p in pop if p not in members))
