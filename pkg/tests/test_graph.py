"""Tests for graphs, reachability and d-separation."""

from collections.abc import Callable

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from oracles import dsep_bayes_ball, dsep_by_paths, strict_descendants

from causaloop.graph import (
    Graph,
    GraphError,
    Node,
    ancestors,
    d_connecting_path,
    d_separated,
    descendants,
    directed_cycles,
    directed_path_exists,
    is_acyclic,
    simple_paths,
    topological_order,
)
from causaloop.scm import CausalModel

GraphFactory = Callable[..., Graph]

NAMES = ("A", "B", "C", "D", "E", "F", "G")

Query = tuple[Graph, set[str], set[str], set[str]]


@st.composite
def graphs(draw: st.DrawFn, acyclic: bool = False, max_size: int = 6) -> Graph:
    """Random graphs whose edge density is drawn first, from empty to complete."""

    size = draw(st.integers(min_value=3, max_value=max_size))
    names = NAMES[:size]
    pairs = [
        (u, v)
        for i, u in enumerate(names)
        for j, v in enumerate(names)
        if i != j and (i < j or not acyclic)
    ]
    density = draw(st.integers(min_value=0, max_value=4))
    chosen = [pair for pair in pairs if draw(st.integers(min_value=1, max_value=4)) <= density]
    return Graph.build([Node(name) for name in names], chosen)


@st.composite
def queries(
    draw: st.DrawFn, acyclic: bool = False, max_size: int = 6
) -> Query:
    g = draw(graphs(acyclic=acyclic, max_size=max_size))
    labels = draw(
        st.lists(st.sampled_from(("x", "y", "z", "-")), min_size=len(g.names), max_size=len(g.names))
    )
    groups: dict[str, set[str]] = {"x": set(), "y": set(), "z": set(), "-": set()}
    for name, label in zip(g.names, labels):
        groups[label].add(name)
    if not groups["x"]:
        groups["x"].add(g.names[0])
        groups["y"].discard(g.names[0])
        groups["z"].discard(g.names[0])
    if not groups["y"]:
        spare = [n for n in g.names if n not in groups["x"]] or [g.names[-1]]
        groups["x"].discard(spare[-1])
        groups["z"].discard(spare[-1])
        groups["y"].add(spare[-1])
    return g, groups["x"], groups["y"], groups["z"]


def test_build_rejects_duplicates_and_self_loops() -> None:
    nodes = [Node("A"), Node("B")]

    with pytest.raises(GraphError, match="Duplicate edge"):
        Graph.build(nodes, [("A", "B"), ("A", "B")])
    with pytest.raises(GraphError, match="Self-loop"):
        Graph.build(nodes, [("A", "A")])
    with pytest.raises(GraphError, match="unknown node 'Z'"):
        Graph.build(nodes, [("A", "Z")])
    with pytest.raises(GraphError, match="Duplicate node name"):
        Graph.build([Node("A"), Node("A")])


def test_node_validation() -> None:
    with pytest.raises(GraphError, match="empty"):
        Node("")
    with pytest.raises(GraphError, match="alphabet"):
        Node("A", alphabet_size=0)


def test_parents_children_follow_declaration_order(graph_factory: GraphFactory) -> None:
    g = graph_factory("C A B", "A->C", "B->C", "C->A")

    assert g.parents("C") == ("A", "B")
    assert g.children("C") == ("A",)
    assert g.observed == ("C", "A", "B")


def test_latent_nodes_are_not_observed(graph_factory: GraphFactory) -> None:
    g = graph_factory("~L A C", "L->A", "L->C")

    assert g.observed == ("A", "C")
    assert not g.node("L").observed


def test_descendants_include_self_only_on_cycles(graph_factory: GraphFactory) -> None:
    g = graph_factory("A B C", "A->B", "B->C", "C->B")

    assert descendants(g, "A") == {"B", "C"}
    assert descendants(g, "B") == {"B", "C"}
    assert ancestors(g, "A") == frozenset()
    assert ancestors(g, "C") == {"A", "B", "C"}


def test_directed_path_exists_between_sets(graph_factory: GraphFactory) -> None:
    g = graph_factory("A B C D", "A->B", "B->C")

    assert directed_path_exists(g, {"A"}, {"C"})
    assert directed_path_exists(g, {"D", "B"}, {"C"})
    assert not directed_path_exists(g, {"C"}, {"A"})
    with pytest.raises(GraphError, match="disjoint"):
        directed_path_exists(g, {"A"}, {"A", "B"})
    with pytest.raises(GraphError, match="nonempty"):
        directed_path_exists(g, set(), {"A"})


def test_topological_order_breaks_ties_by_declaration(graph_factory: GraphFactory) -> None:
    g = graph_factory("C A B", "A->B")

    assert topological_order(g) == ("C", "A", "B")
    with pytest.raises(GraphError, match="acyclic"):
        topological_order(graph_factory("A B", "A->B", "B->A"))


def test_directed_cycles_are_rotated_to_earliest_node(graph_factory: GraphFactory) -> None:
    g = graph_factory("A B C", "A->B", "B->C", "C->B", "C->A")

    assert directed_cycles(g) == [("B", "C"), ("A", "B", "C")]
    assert not is_acyclic(g)


def test_two_cycle_yields_one_path_per_orientation(graph_factory: GraphFactory) -> None:
    g = graph_factory("B C", "B->C", "C->B")

    rendered = sorted(str(p) for p in simple_paths(g, "B", "C"))

    assert rendered == ["B -> C", "B <- C"]


def test_collider_opens_when_conditioned_on_descendant(graph_factory: GraphFactory) -> None:
    g = graph_factory("A B C D", "A->B", "C->B", "B->D")

    assert d_separated(g, {"A"}, {"C"})
    assert not d_separated(g, {"A"}, {"C"}, {"B"})
    assert not d_separated(g, {"A"}, {"C"}, {"D"})


def test_chain_and_fork_block_when_conditioned(graph_factory: GraphFactory) -> None:
    chain = graph_factory("A B C", "A->B", "B->C")
    fork = graph_factory("A B C", "B->A", "B->C")

    for g in (chain, fork):
        assert not d_separated(g, {"A"}, {"C"})
        assert d_separated(g, {"A"}, {"C"}, {"B"})


def test_d_connecting_path_is_reported(graph_factory: GraphFactory) -> None:
    g = graph_factory("~L A B C", "L->A", "L->C", "B->C")

    path = d_connecting_path(g, {"A"}, {"C"})

    assert path is not None
    assert str(path) == "A <- L -> C"
    assert d_connecting_path(g, {"A"}, {"B"}) is None


def test_separation_rejects_overlapping_sets(graph_factory: GraphFactory) -> None:
    g = graph_factory("A B C", "A->B")

    with pytest.raises(GraphError, match="disjoint"):
        d_separated(g, {"A"}, {"B"}, {"A"})
    with pytest.raises(GraphError, match="Unknown node"):
        d_separated(g, {"A"}, {"Q"})


def test_remove_incoming_and_without(graph_factory: GraphFactory) -> None:
    g = graph_factory("A B C", "A->B", "C->B", "B->C")

    cut = g.remove_incoming({"B"})
    assert cut.edges == {("B", "C")}
    assert cut.names == g.names

    reduced = g.without({"C"})
    assert reduced.names == ("A", "B")
    assert reduced.edges == {("A", "B")}


def test_fixture_graphs(otp: CausalModel, jam: CausalModel, loop: CausalModel) -> None:
    assert d_separated(otp.graph, {"A"}, {"C"})
    assert not d_separated(otp.graph, {"A"}, {"C"}, {"B"})
    assert d_separated(jam.graph, {"A"}, {"B"})
    assert not d_separated(jam.graph, {"A"}, {"C"})
    assert not d_separated(loop.graph, {"B"}, {"C"})
    assert directed_cycles(loop.graph) == [("B", "C")]


@given(queries())
@settings(max_examples=200, deadline=None)
def test_dsep_matches_path_enumeration(query: Query) -> None:
    g, x, y, z = query

    assert d_separated(g, x, y, z) == dsep_by_paths(g, x, y, z)


@given(queries(acyclic=True))
@settings(max_examples=200, deadline=None)
def test_dsep_matches_bayes_ball_on_dags(query: Query) -> None:
    g, x, y, z = query

    assert d_separated(g, x, y, z) == dsep_bayes_ball(g, x, y, z)


@given(graphs())
@settings(max_examples=100, deadline=None)
def test_descendants_are_transitive(g: Graph) -> None:
    for name in g.names:
        reach = descendants(g, name)
        for other in reach:
            assert descendants(g, other) <= reach
        assert (name in reach) == any(name in cycle for cycle in directed_cycles(g))


def _ancestors_or_self(g: Graph, name: str) -> set[str]:
    return {w for w in g.names if w == name or name in strict_descendants(g, w)}


@given(queries(max_size=7))
@settings(max_examples=200, deadline=None)
def test_unconditional_separation_means_no_common_ancestor(query: Query) -> None:
    g, x, y, _ = query

    shared = any(_ancestors_or_self(g, a) & _ancestors_or_self(g, b) for a in x for b in y)

    assert d_separated(g, x, y) == (not shared)


@given(queries())
@settings(max_examples=150, deadline=None)
def test_dsep_is_symmetric(query: Query) -> None:
    g, x, y, z = query

    assert d_separated(g, x, y, z) == d_separated(g, y, x, z)


@given(queries(), st.data())
@settings(max_examples=150, deadline=None)
def test_adding_an_edge_never_separates(query: Query, data: st.DataObject) -> None:
    g, x, y, z = query
    missing = [(u, v) for u in g.names for v in g.names if u != v and (u, v) not in g.edges]
    assume(missing and not d_separated(g, x, y, z))
    extra = data.draw(st.sampled_from(missing))

    bigger = Graph.build(list(g.nodes), [*g.sorted_edges(), extra])

    assert not d_separated(bigger, x, y, z)
