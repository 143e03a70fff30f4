import json

import pytest

from fedgov.checks import check_conservation, check_pfr, check_validity
from fedgov.engine import run_trace
from fedgov.errors import ScenarioError
from fedgov.scenario import Churn, Growth, ScenarioSpec, check_admissible, generate
from fedgov.trace import parse_trace


def growth_only(seed=3, **kw):
    return ScenarioSpec(seed=seed, n=3, tau=5, max_persons=50, max_communities=12,
                        growth=Growth(ticks=150, participate=0.7, federate=0.15, join=0.5),
                        churn=Churn(ticks=0, leave=0, remove_member=0), quiet_terms=20, **kw)


def test_growth_only_is_admissible():
    sc = generate(growth_only())
    kinds = {e.kind for e in sc.events}
    assert kinds == {"participate", "federate", "join"}
    people = {e.person for e in sc.events if e.kind == "participate"}
    assert 1 < len(people) <= 50
    config = sc.spec.engine_config()
    check_admissible(sc.events, config)
    engine, log = run_trace(sc.events, config, sc.horizon)
    assert check_validity(log) == []
    assert check_pfr(log) == []
    assert check_conservation(log) == []
    assert sc.horizon == max(sc.fst, sc.events[-1].t) + 20 * 5


def test_caps_respected():
    spec = growth_only(seed=11)
    spec.max_persons, spec.max_communities = 8, 3
    sc = generate(spec)
    assert len({e.person for e in sc.events if e.kind == "participate"}) <= 8
    assert len({e.community for e in sc.events if e.kind == "federate"}) <= 3


def test_churn_removes_and_refills():
    spec = ScenarioSpec(seed=5, n=2, tau=4, max_persons=30, max_communities=8,
                        growth=Growth(ticks=80, participate=0.8, federate=0.2, join=0.6),
                        churn=Churn(ticks=60, leave=0.2, remove_member=0.3), quiet_terms=10)
    sc = generate(spec)
    kinds = {e.kind for e in sc.events}
    assert {"leave", "remove_member"} <= kinds
    _, log = run_trace(sc.events, spec.engine_config(), sc.horizon)
    rules = {e.get("rule") for e in log.entries}
    assert {"leave", "A1"} <= rules or {"leave", "A2"} <= rules
    assert check_validity(log) == []


@pytest.mark.parametrize("seed", range(5))
def test_all_kinds_forced(seed):
    # tiny rates: the last tick of each phase forces kinds not yet seen
    spec = ScenarioSpec(seed=seed, n=2, tau=3, max_persons=10, max_communities=4,
                        growth=Growth(ticks=20, participate=0.5, federate=0.01, join=0.01),
                        churn=Churn(ticks=10, leave=0.01, remove_member=0.01), quiet_terms=5,
                        child_min_pop_enforced=False)
    kinds = {e.kind for e in generate(spec).events}
    assert kinds == {"participate", "federate", "join", "leave", "remove_member"}


def test_zero_rates_give_quiet_tail_only():
    spec = ScenarioSpec(seed=2, n=2, tau=7, max_persons=0, max_communities=0,
                        growth=Growth(ticks=30, participate=0, federate=0, join=0),
                        churn=Churn(ticks=30, leave=0, remove_member=0), quiet_terms=4)
    sc = generate(spec)
    assert sc.events == []
    assert (sc.fst, sc.horizon) == (0, 28)


def test_seed_determinism_and_override():
    a, b = generate(growth_only(seed=9)), generate(growth_only(seed=9))
    assert a.trace_text() == b.trace_text()
    c = generate(growth_only(seed=9), seed=10)
    assert c.spec.seed == 10 and c.trace_text() != a.trace_text()
    assert parse_trace(a.trace_text())[0].kind == "participate"


@pytest.mark.parametrize(
    "data, message",
    [
        ({"n": 0}, "n and tau must be positive"),
        ({"growth": {"participate": 1.5}}, "outside [0, 1]"),
        ({"max_persons": 0}, "participate rate is positive"),
        ({"max_communities": 0}, "federate/join rates"),
        ({"max_children": 0}, "max_children"),
        ({"quiet_terms": 0}, "quiet tail"),
        ({"colour": "blue"}, "bad scenario spec"),
    ],
)
def test_spec_errors(data, message):
    with pytest.raises(ScenarioError) as info:
        ScenarioSpec.from_dict(data)
    assert message in str(info.value)


def test_spec_json_roundtrip(tmp_path):
    spec = growth_only(seed=4)
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec.to_dict()))
    assert ScenarioSpec.load(path) == spec
    path.write_text("[1, 2]")
    with pytest.raises(ScenarioError):
        ScenarioSpec.load(path)
