"""Tests for model validation, solving and the d-separation audit."""

import logging
from fractions import Fraction

import pytest
from hypothesis import given, settings
from oracles import consistent_histogram
from strategies import random_models

from causaloop.distribution import JointDistribution, Variable, marginal, uniform
from causaloop.graph import Graph, Node, NodeKind
from causaloop.mechanisms import Const, Expression, Mechanism, Not, Ref, Table, Xor
from causaloop.scm import (
    CausalModel,
    ModelError,
    SolveError,
    Triple,
    check_dsep_property,
    cycle_breaking_sets,
    detect_fine_tuning,
    enumerate_consistent_assignments,
    observed_distribution,
    solution_multiplicity,
    solve,
    solve_acyclic,
    solve_cyclic,
    split_invariance,
    split_node,
    with_noise,
)

QUARTER = Fraction(1, 4)


def _model(
    names: str,
    edges: list[tuple[str, str]],
    mechanisms: dict[str, Expression],
    noise: dict[str, str] | None = None,
) -> CausalModel:
    """``noise`` maps a uniform binary noise variable to the node it feeds."""

    noise = noise or {}
    fed = {node: name for name, node in noise.items()}
    nodes = [
        Node(n.lstrip("~"), 2, NodeKind.LATENT if n.startswith("~") else NodeKind.OBSERVED)
        for n in names.split()
    ]
    return CausalModel(
        graph=Graph.build(nodes, edges),
        mechanisms={
            node: Mechanism(node, expression, fed.get(node))
            for node, expression in mechanisms.items()
        },
        noise={name: uniform(name, 2) for name in noise},
    )


def _selection_model() -> CausalModel:
    """X and Z are d-separated, but consistency of the Y1/Y2 cycle forces X = Z."""

    return _model(
        "X Z Y1 Y2",
        [("X", "Y1"), ("Y1", "Y2"), ("Y2", "Y1"), ("Z", "Y2")],
        {
            "X": Ref("E_X"),
            "Z": Ref("E_Z"),
            "Y1": Xor((Ref("X"), Ref("Y2"))),
            "Y2": Xor((Ref("Y1"), Ref("Z"))),
        },
        {"E_X": "X", "E_Z": "Z"},
    )


def test_otp_solves_to_parity_distribution(otp: CausalModel) -> None:
    report = solve(otp)

    assert report.method == "acyclic"
    assert report.header() == "method=acyclic weight=1/1"
    assert report.distribution.table == {
        (0, 0, 0): QUARTER,
        (0, 1, 1): QUARTER,
        (1, 1, 0): QUARTER,
        (1, 0, 1): QUARTER,
    }


def test_jam_solves_acyclically(jam: CausalModel) -> None:
    report = solve(jam)

    assert report.distribution.names == ("L", "A", "B", "C")
    assert report.distribution.table == {
        (0, 0, 0, 0): QUARTER,
        (0, 0, 1, 1): QUARTER,
        (1, 1, 0, 1): QUARTER,
        (1, 1, 1, 0): QUARTER,
    }


def test_loop_solves_by_splitting_b(loop: CausalModel) -> None:
    report = solve(loop)

    assert report.split == ("B",)
    assert report.header() == "method=split:B weight=1/1"
    assert report.distribution.names == ("L", "A", "B", "C")
    assert report.distribution.table == {
        (0, 0, 0, 0): QUARTER,
        (0, 0, 1, 1): QUARTER,
        (1, 1, 0, 1): QUARTER,
        (1, 1, 1, 0): QUARTER,
    }


def test_loop_split_choice_does_not_matter(loop: CausalModel) -> None:
    assert cycle_breaking_sets(loop) == [("B",), ("C",)]
    assert split_invariance(loop)
    assert solve_cyclic(loop, split={"C"}).distribution == solve(loop).distribution


def test_loop_has_two_solutions_for_every_noise_value(loop: CausalModel) -> None:
    assert solution_multiplicity(loop) == {(0,): 2, (1,): 2}
    assert enumerate_consistent_assignments(loop, {"E_L": 1}) == [
        {"L": 1, "A": 1, "B": 0, "C": 1},
        {"L": 1, "A": 1, "B": 1, "C": 0},
    ]
    with pytest.raises(SolveError, match="missing"):
        enumerate_consistent_assignments(loop, {})


def test_observed_distributions_of_jam_and_loop_coincide(jam: CausalModel, loop: CausalModel) -> None:
    assert observed_distribution(jam) == observed_distribution(loop)


def test_split_node_creates_latent_uniform_source(loop: CausalModel) -> None:
    split = split_node(loop, "B")

    assert split.graph.names[-1] == "B'"
    assert not split.graph.node("B'").observed
    assert split.graph.parents("C") == ("L", "B'")
    assert split.split_copies == {"B'": "B"}
    assert split.noise["E_B'"] == uniform("E_B'", 2)

    with pytest.raises(ModelError, match="does not lie on any directed cycle"):
        split_node(loop, "A")
    with pytest.raises(ModelError, match="latent"):
        split_node(loop, "L")


def test_explicit_split_must_break_every_cycle(loop: CausalModel) -> None:
    with pytest.raises(SolveError, match="leaves a directed cycle"):
        solve_cyclic(loop, split={"A"})
    with pytest.raises(SolveError, match="latent"):
        solve_cyclic(loop, split={"L"})
    with pytest.raises(SolveError, match="use solve_cyclic"):
        solve_acyclic(loop)


def test_contradictory_cycle_has_no_solution() -> None:
    m = _model("A B", [("A", "B"), ("B", "A")], {"A": Not(Ref("B")), "B": Ref("A")})

    with pytest.raises(SolveError, match="no consistent solution"):
        solve(m)
    assert solution_multiplicity(m) == {(): 0}


def test_cycle_through_latent_nodes_only_cannot_be_split() -> None:
    m = _model(
        "~L ~M A",
        [("L", "M"), ("M", "L"), ("L", "A")],
        {"L": Ref("M"), "M": Ref("L"), "A": Ref("L")},
    )

    with pytest.raises(SolveError, match="contain no observed node"):
        solve(m)


@pytest.mark.parametrize(
    "mechanisms, noise, message",
    [
        ({"A": Ref("E")}, {"E": "A"}, "missing"),
        ({"A": Ref("E"), "B": Const(1)}, {"E": "A"}, "ignores parents"),
        ({"A": Ref("B"), "B": Ref("A")}, {}, "not its parents"),
    ],
)
def test_validation_rejects_inconsistent_mechanisms(
    mechanisms: dict[str, Expression], noise: dict[str, str], message: str
) -> None:
    with pytest.raises(ModelError, match=message):
        _model("A B", [("A", "B")], mechanisms, noise)


def test_validation_rejects_shared_noise_and_partial_tables() -> None:
    graph = Graph.build([Node("A"), Node("B")])
    shared = {
        "A": Mechanism("A", Ref("E"), "E"),
        "B": Mechanism("B", Ref("E"), "E"),
    }
    with pytest.raises(ModelError, match="feeds both"):
        CausalModel(graph=graph, mechanisms=shared, noise={"E": uniform("E", 2)})

    partial = Table(args=("E",), rows=(((0,), 1),))
    with pytest.raises(ModelError, match="no row"):
        CausalModel(
            graph=Graph.build([Node("A")]),
            mechanisms={"A": Mechanism("A", partial, "E")},
            noise={"E": uniform("E", 2)},
        )
    with pytest.raises(ModelError, match="clashes"):
        CausalModel(
            graph=Graph.build([Node("A")]),
            mechanisms={"A": Mechanism("A", Ref("A"), "A")},
            noise={"A": uniform("A", 2)},
        )


def test_dsep_property_holds_for_fixtures(otp: CausalModel, jam: CausalModel, loop: CausalModel) -> None:
    for m in (otp, jam, loop):
        assert check_dsep_property(m.graph, observed_distribution(m)) == []
        assert solve(m, audit=True).dsep_violations == ()


def test_fine_tuned_triples(jam: CausalModel, loop: CausalModel) -> None:
    jam_triples = detect_fine_tuning(jam.graph, observed_distribution(jam))
    loop_triples = detect_fine_tuning(loop.graph, observed_distribution(loop))

    assert Triple(("B",), ("C",)) in jam_triples
    assert Triple(("A",), ("B",)) in loop_triples
    assert Triple(("B",), ("C",)) in loop_triples
    assert str(Triple(("B",), ("C",))) == "{B}|{C}|{}"


def test_one_time_pad_hides_each_input(otp: CausalModel) -> None:
    triples = detect_fine_tuning(otp.graph, observed_distribution(otp))

    assert Triple(("A",), ("B",)) in triples
    assert Triple(("B",), ("C",)) in triples
    assert Triple(("A",), ("C",), ("B",)) not in triples


def test_selection_on_a_cycle_violates_dsep_property(caplog: pytest.LogCaptureFixture) -> None:
    m = _selection_model()

    with caplog.at_level(logging.WARNING, logger="causaloop.scm"):
        report = solve(m, audit=True)

    assert report.weight == Fraction(1, 2)
    assert Triple(("X",), ("Z",)) in report.dsep_violations
    assert "violates the d-separation property" in caplog.text
    assert marginal(report.distribution, {"X", "Z"}).table == {
        (0, 0): Fraction(1, 2),
        (1, 1): Fraction(1, 2),
    }


def test_with_noise_replaces_one_distribution(jam: CausalModel) -> None:
    biased = JointDistribution(
        variables=(Variable("E_L", 2),), table={(0,): Fraction(3, 4), (1,): QUARTER}
    )

    skewed = with_noise(jam, "E_L", biased)

    assert marginal(solve(skewed).distribution, {"A"}).table == {
        (0,): Fraction(3, 4),
        (1,): QUARTER,
    }
    with pytest.raises(ModelError, match="Unknown noise"):
        with_noise(jam, "E_Q", biased)
    with pytest.raises(ModelError, match="keep its single variable"):
        with_noise(jam, "E_L", uniform("E_L", 3))


@given(random_models(acyclic=True, max_nodes=5, max_alphabet=3))
@settings(max_examples=100, deadline=None)
def test_solve_acyclic_matches_exhaustive_histogram(m: CausalModel) -> None:
    assert solve_acyclic(m).distribution.table == consistent_histogram(m)


@given(random_models(max_nodes=4, max_alphabet=3))
@settings(max_examples=150, deadline=None)
def test_solve_matches_exhaustive_consistent_histogram(m: CausalModel) -> None:
    expected = consistent_histogram(m)

    if not expected:
        with pytest.raises(SolveError):
            solve(m)
        return
    assert solve(m).distribution.table == expected
    assert split_invariance(m)
