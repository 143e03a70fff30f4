import pytest

from fedgov.graph import (
    ASSEMBLY_MEMBERSHIP,
    ASSEMBLY_SIZE,
    CYCLE,
    LEAF_OVERLAP,
    FederationGraph,
    children,
    population,
    validate,
    would_create_cycle,
)


@pytest.fixture
def exampleb():
    g = FederationGraph()
    for leaf, person in (("A", "Alice"), ("B", "Bob"), ("C", "Carol")):
        g.add_leaf(leaf, [person])
    g.add_node("X")
    g.add_edge("X", "A")
    g.add_edge("X", "B")
    g.add_node("Y")
    g.add_edge("Y", "X")
    g.add_edge("Y", "C")
    return g


def test_children_of_exampleb(exampleb):
    assert children(exampleb, "Y") == {"X", "C"}
    assert children(exampleb, "X") == {"A", "B"}
    assert children(exampleb, "A") == set()


def test_population_of_exampleb(exampleb):
    assert population(exampleb, "Y") == {"Alice", "Bob", "Carol"}
    assert population(exampleb, "X") == {"Alice", "Bob"}
    assert population(exampleb, "C") == {"Carol"}


def test_unknown_ids_raise(exampleb):
    with pytest.raises(KeyError):
        exampleb.population("Z")
    with pytest.raises(KeyError):
        exampleb.children("Z")
    with pytest.raises(KeyError):
        would_create_cycle(exampleb, "Z", "A")


def test_diamond_counts_shared_leaf_once():
    g = FederationGraph()
    g.add_leaf("L", ["p"])
    g.add_leaf("M", ["q"])
    for mid in ("U", "V"):
        g.add_node(mid)
        g.add_edge(mid, "L")
    g.add_edge("V", "M")
    g.add_node("top")
    g.add_edge("top", "U")
    g.add_edge("top", "V")
    assert g.population("top") == {"p", "q"}
    assert validate(g, {"L": ["p"], "M": ["q"], "U": ["p"], "V": ["p", "q"], "top": ["p", "q"]}, 2).ok


def test_cycle_queries(exampleb):
    assert not would_create_cycle(exampleb, "Y", "A")
    assert would_create_cycle(exampleb, "X", "X")
    assert would_create_cycle(exampleb, "X", "Y")
    assert would_create_cycle(exampleb, "A", "Y")


def test_population_cache_follows_version(exampleb):
    before = exampleb.population("Y")
    v = exampleb.version
    exampleb.remove_edge("Y", "C")
    assert exampleb.version > v
    assert exampleb.population("Y") == before - {"Carol"}


def test_duplicate_edge_rejected(exampleb):
    with pytest.raises(ValueError):
        exampleb.add_edge("X", "A")


def test_exampleb_assemblies_are_valid(exampleb):
    assemblies = {"A": ["Alice"], "B": ["Bob"], "C": ["Carol"], "X": ["Alice", "Bob"], "Y": ["Alice", "Carol"]}
    assert validate(exampleb, assemblies, 2).violations == []


def test_empty_graph_is_valid():
    assert validate(FederationGraph(), {}, 3).ok


def test_leaf_overlap_reported():
    g = FederationGraph()
    g.add_leaf("L1", ["Alice"])
    g.add_leaf("L2", ["Alice"])
    report = validate(g, {"L1": ["Alice"], "L2": ["Alice"]}, 1)
    assert report.kinds() == {LEAF_OVERLAP}


def test_cycle_reported():
    g = FederationGraph()
    g.add_leaf("L", ["p"])
    for v in ("U", "V"):
        g.add_node(v)
    g.add_edge("U", "V")
    g.add_edge("V", "U")
    g.add_edge("U", "L")
    assert CYCLE in validate(g, {}, 1).kinds()


def test_assembly_violations(exampleb):
    assemblies = {"A": ["Alice"], "B": ["Bob"], "C": ["Carol"], "X": ["Alice", "Carol"], "Y": ["Alice"]}
    kinds = validate(exampleb, assemblies, 2).kinds()
    assert ASSEMBLY_MEMBERSHIP in kinds
    assert ASSEMBLY_SIZE in kinds


def test_topological_order_children_first(exampleb):
    order = exampleb.topological_order()
    for f, v in exampleb.edges():
        assert order.index(v) < order.index(f)


def test_remove_node_drops_incident_edges(exampleb):
    exampleb.remove_node("C")
    assert ("Y", "C") not in exampleb.edges()
    assert exampleb.population("Y") == {"Alice", "Bob"}
