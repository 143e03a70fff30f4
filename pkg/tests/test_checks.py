import copy
from fractions import Fraction

import pytest

from conftest import EXAMPLE_TRACE, flat_trace, tick_integrals, two_children_trace
from fedgov.checks import (
    PFRViolation,
    check_colors,
    check_conservation,
    check_convergence,
    check_pfr,
    check_validity,
    fairness_report,
    horizon_of,
    oracle_recompute,
    ratio_spread_series,
    replay,
    spread_increases,
    stabilization_time,
)
from fedgov.engine import EngineConfig, RunLog, run_trace
from fedgov.graph import ASSEMBLY_SIZE
from fedgov.trace import parse_trace


def run(text, n, tau=10, horizon=None):
    events = parse_trace(text)
    return run_trace(events, EngineConfig(n, tau), horizon if horizon is not None else events[-1].t)


@pytest.fixture
def two_children_log():
    return run(two_children_trace(), 3, horizon=0)[1]


def planted(log, seq, **changes):
    """Copy of ``log`` with entry ``seq`` dropped (no changes) or edited."""
    out = RunLog(dict(log.header), copy.deepcopy(log.entries))
    idx = next(i for i, e in enumerate(out.entries) if e["seq"] == seq)
    if changes:
        out.entries[idx].update(changes)
    else:
        del out.entries[idx]
    return out


def test_running_example_pfr(example_run):
    _, log = example_run
    assert check_pfr(log) == []
    # without the |P_v| cap the single-person child A of X is "owed" 2 seats
    assert check_pfr(log, strict=True) == [PFRViolation(3, "X", "A", 1, 2)]


def test_planted_missing_seat(two_children_log):
    # seq 31 seats p4 for V in F
    entry = next(e for e in two_children_log.entries if e["seq"] == 31)
    assert (entry["community"], entry["person"], entry["color"]) == ("F", "p4", "V")
    bad = planted(two_children_log, 31)
    assert check_pfr(two_children_log) == []
    assert check_pfr(bad) == [PFRViolation(0, "F", "V", 0, 1)]
    assert [r.kinds() for _, r in check_validity(bad)] == [{ASSEMBLY_SIZE}]
    assert check_conservation(bad) == ["t=0: assembly of F has 2 seats, want 3"]


def test_planted_color(two_children_log):
    bad = planted(two_children_log, 31, color="U")
    assert check_colors(two_children_log) == []
    assert check_colors(bad) == [(0, "F", "p4")]


def test_clean_logs_are_valid(example_run, two_children_log):
    for log in (example_run[1], two_children_log, run(flat_trace(7), 3, horizon=300)[1]):
        assert check_validity(log) == []
        assert check_colors(log) == []
        assert check_conservation(log) == []


def test_oracle_matches_ledger_and_tick_sum(example_run):
    engine, log = example_run
    t = horizon_of(log)
    assert oracle_recompute(log) == engine.state.ledger.totals(t)
    seat, share = tick_integrals(log, t)
    naive = {k: (seat.get(k, 0), share[k]) for k in share if seat.get(k, 0) or share[k]}
    assert oracle_recompute(log) == naive


def test_oracle_on_window(example_run):
    _, log = example_run
    whole = oracle_recompute(log, upto=500)
    head = oracle_recompute(log, upto=100)
    tail = oracle_recompute(log, upto=500, start=100)
    for key, (s, h) in whole.items():
        hs, hh = head.get(key, (0, 0))
        ts, th = tail.get(key, (0, 0))
        assert (hs + ts, hh + th) == (s, h)


def test_empty_log():
    engine, log = run_trace([], EngineConfig(2, 10), horizon=100)
    assert oracle_recompute(log) == {}
    assert engine.state.ledger.totals(100) == {}
    assert stabilization_time(log) == 0
    assert check_pfr(log) == []


def test_stabilization_time_ignores_seat_events(example_run):
    _, log = example_run
    assert stabilization_time(log) == 7
    text = EXAMPLE_TRACE + "t=1000 kind=remove_member person=Carol community=C\n"
    _, log2 = run(text, 2, horizon=1500)
    # Carol's leaf empties and is collected: that changes the structure
    assert any(e["op"] == "gc" for e in log2.entries)
    assert stabilization_time(log2) == 1000


def test_running_example_convergence(example_run):
    _, log = example_run
    report = check_convergence(log, 7, 3007, Fraction(1, 20))
    # Y: three people, two seats, terms of 10; each person sits 2 terms in 3,
    # and the 3000-tick tail is exactly 100 such cycles
    for p in ("Alice", "Bob", "Carol"):
        assert report.eep_gaps[("Y", p)] == 0
    # shares in Y: X holds weight 2 of 3, C weight 1 of 3, times n=2
    assert report.child_averages[("Y", "X")] == (Fraction(4, 3), Fraction(4, 3))
    assert report.child_averages[("Y", "C")] == (Fraction(2, 3), Fraction(2, 3))
    assert report.passed()


def test_efr_not_judged_below_n(example_run):
    _, log = example_run
    report = check_convergence(log, 7, 3007, Fraction(1, 20))
    # X has |P| = 2 = n so it is judged; leaves have no children at all
    assert ("X", "A") in report.efr_deficits
    engine, small = run(two_children_trace(), 5, horizon=100)
    report = check_convergence(small, 0, 100, Fraction(1, 20))
    assert {f for f, _ in report.efr_deficits} == {"F"}  # |U| = |V| = 3 < 5 <= |F|


def test_horizon_must_follow_fst(example_run):
    _, log = example_run
    with pytest.raises(ValueError):
        check_convergence(log, 7, 7, Fraction(1, 20))
    short = run(EXAMPLE_TRACE, 2, horizon=7)[1]
    report = fairness_report(short, Fraction(1, 20))
    assert report.eep_gaps == {} and report.passed()


def test_spread_series(example_run):
    _, log = example_run
    series = ratio_spread_series(log, 7, 3007, 10)
    assert set(series) == {"X", "Y"}  # leaves have a single person
    # X seats both its people for ever: equal ratios
    assert set(series["X"]) == {0}
    assert len(series["Y"]) == 301
    assert all(x >= 0 for x in series["Y"])


def test_spread_increases():
    series = {"F": [Fraction(1, 2), Fraction(1, 4), Fraction(26, 100), Fraction(1, 2)]}
    assert spread_increases(series, Fraction(1, 100)) == [("F", 3, Fraction(26, 100), Fraction(1, 2))]
    assert spread_increases(series, Fraction(1, 2)) == []


def test_replay_state_sequence(example_run):
    _, log = example_run
    states = list(replay(log))
    times = [t for t, _, _ in states]
    assert times == sorted(set(times))
    # only the first and last state may have zero dwell
    assert all(t < t_next for t, t_next, _ in states[1:-1])
    assert states[-1][1] == horizon_of(log)


def test_spread_sawtooth_under_round_robin():
    # three people, one seat, one-tick terms: seats go q1, q2, q3, q1, ...
    # after t ticks the seat counts differ by at most one and each share is t/3,
    # so the spread is 0 when 3 divides t and 1/(t/3) = 3/t otherwise
    _, log = run(flat_trace(3), 1, tau=1, horizon=30)
    holders = [e["person"] for e in log.entries if e["op"] == "add" and e["community"] == "F" and e["t"] >= 1]
    assert holders == [f"q{(t % 3) + 1}" for t in range(1, 31)]
    series = ratio_spread_series(log, 0, 30, 1)["F"]
    want = [Fraction(0)] + [Fraction(0) if t % 3 == 0 else Fraction(3, t) for t in range(1, 31)]
    assert series == want
    # so an ideal rotation still rises by 3/(3m+1) every third term
    assert len(spread_increases({"F": series}, Fraction(1, 100))) == 10
