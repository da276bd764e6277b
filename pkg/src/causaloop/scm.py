"""Solve causal models for their distributions and audit them against their graph.

Acyclic models are solved by pushing every noise assignment through the
mechanisms in topological order. Cyclic models are solved by splitting one
observed node on each cycle into a sink copy and a fresh parentless source
with a uniform prior, solving the resulting acyclic model, post-selecting on
each split node agreeing with its copy, and renormalising.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Collection, Iterator, Mapping
from dataclasses import dataclass, field
from fractions import Fraction

from causaloop.distribution import (
    DistributionError,
    JointDistribution,
    Row,
    Variable,
    all_rows,
    format_fraction,
    is_independent,
    marginal,
    uniform,
)
from causaloop.graph import (
    Graph,
    Node,
    NodeKind,
    d_separated,
    descendants,
    directed_cycles,
    is_acyclic,
    topological_order,
)
from causaloop.mechanisms import Mechanism, MechanismError, Ref, Table

logger = logging.getLogger(__name__)


class ModelError(RuntimeError):
    """Raised when a causal model violates its structural invariants."""


class SolveError(RuntimeError):
    """Raised when a model's distribution cannot be computed."""


@dataclass(frozen=True, slots=True)
class CausalModel:
    """A graph, one mechanism per graph node, and the exogenous noise distributions.

    Noise variables are not graph nodes. ``split_copies`` maps each copy created
    by node splitting to the node it was split from.
    """

    graph: Graph
    mechanisms: Mapping[str, Mechanism]
    noise: Mapping[str, JointDistribution] = field(default_factory=dict)
    name: str = "model"
    split_copies: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        _validate(self)

    @property
    def observed(self) -> tuple[str, ...]:
        return self.graph.observed

    @property
    def endogenous(self) -> tuple[str, ...]:
        """Graph nodes other than split copies, in declaration order."""

        return tuple(n for n in self.graph.names if n not in self.split_copies)

    def noise_size(self, name: str) -> int:
        return self.noise[name].variables[0].size

    def input_sizes(self, node: str) -> dict[str, int]:
        mechanism = self.mechanisms[node]
        sizes = {p: self.graph.node(p).alphabet_size for p in self.graph.parents(node)}
        if mechanism.noise_parent is not None:
            sizes[mechanism.noise_parent] = self.noise_size(mechanism.noise_parent)
        return sizes


def _validate(m: CausalModel) -> None:
    names = set(m.graph.names)
    if set(m.mechanisms) != names:
        missing = sorted(names - set(m.mechanisms))
        extra = sorted(set(m.mechanisms) - names)
        raise ModelError(
            f"Every graph node needs exactly one mechanism (missing {missing}, unknown {extra})."
        )

    for noise_name, distribution in m.noise.items():
        if noise_name in names:
            raise ModelError(f"Noise variable '{noise_name}' clashes with a graph node.")
        if distribution.names != (noise_name,):
            raise ModelError(
                f"Noise '{noise_name}' must be a distribution over itself alone."
            )

    consumers: dict[str, str] = {}
    for node, mechanism in m.mechanisms.items():
        if mechanism.node != node:
            raise ModelError(f"Mechanism for '{mechanism.node}' is filed under '{node}'.")
        parents = set(m.graph.parents(node))
        noise_parent = mechanism.noise_parent
        if noise_parent is not None:
            if noise_parent not in m.noise:
                raise ModelError(f"'{node}' reads undeclared noise '{noise_parent}'.")
            if noise_parent in consumers:
                raise ModelError(
                    f"Noise '{noise_parent}' feeds both '{consumers[noise_parent]}' and '{node}'."
                )
            consumers[noise_parent] = node
        allowed = parents | ({noise_parent} if noise_parent else set())
        used = set(mechanism.inputs)
        if used - allowed:
            raise ModelError(
                f"Mechanism of '{node}' reads {sorted(used - allowed)}, which are not its parents."
            )
        if parents - used:
            raise ModelError(
                f"Mechanism of '{node}' ignores parents {sorted(parents - used)}."
            )
        if isinstance(mechanism.expression, Table):
            try:
                mechanism.expression.check_total(m.input_sizes(node))
            except MechanismError as exc:
                raise ModelError(f"Mechanism of '{node}': {exc}") from exc

    unused = sorted(set(m.noise) - set(consumers))
    if unused:
        raise ModelError(f"Noise variables {unused} feed no node.")

    for copy, original in m.split_copies.items():
        if copy not in names or original not in names:
            raise ModelError(f"Split copy '{copy}' of '{original}' is not in the graph.")


@dataclass(frozen=True, slots=True)
class Triple:
    """A query (X, Y, Z): X and Y given Z."""

    x: tuple[str, ...]
    y: tuple[str, ...]
    z: tuple[str, ...] = ()

    def __str__(self) -> str:
        def braces(group: tuple[str, ...]) -> str:
            return "{" + ",".join(group) + "}"

        return f"{braces(self.x)}|{braces(self.y)}|{braces(self.z)}"


@dataclass(frozen=True, slots=True)
class SolveReport:
    """A solved distribution over the model's endogenous nodes.

    ``split`` is empty for the acyclic method; otherwise it names the split
    nodes. ``weight`` is the post-selection weight before renormalisation.
    """

    distribution: JointDistribution
    split: tuple[str, ...] = ()
    weight: Fraction = Fraction(1)
    dsep_violations: tuple[Triple, ...] = ()

    @property
    def method(self) -> str:
        return "split:" + ",".join(self.split) if self.split else "acyclic"

    def header(self) -> str:
        return f"method={self.method} weight={format_fraction(self.weight)}"


def _noise_assignments(m: CausalModel) -> Iterator[tuple[dict[str, int], Fraction]]:
    names = list(m.noise)
    supports = [list(m.noise[name].support()) for name in names]
    for combination in itertools.product(*supports):
        values = {name: row[0] for name, (row, _) in zip(names, combination)}
        weight = Fraction(1)
        for _, mass in combination:
            weight *= mass
        yield values, weight


def _require_fixed(m: CausalModel) -> None:
    free = [node for node, mech in m.mechanisms.items() if mech.is_free]
    if free:
        raise SolveError(
            f"Nodes {free} are free intervention inputs; give them values to solve."
        )


def solve_acyclic(m: CausalModel) -> SolveReport:
    """Exact pushforward of the noise product through the mechanisms."""

    if not is_acyclic(m.graph):
        raise SolveError(
            f"Model '{m.name}' has directed cycles {directed_cycles(m.graph)}; use solve_cyclic."
        )
    _require_fixed(m)
    order = topological_order(m.graph)
    names = m.graph.names
    table: dict[Row, Fraction] = {}
    for values, weight in _noise_assignments(m):
        for node in order:
            values[node] = m.mechanisms[node].expression.evaluate(
                values, m.graph.node(node).alphabet_size
            )
        row = tuple(values[name] for name in names)
        table[row] = table.get(row, Fraction(0)) + weight
    variables = tuple(Variable(n.name, n.alphabet_size) for n in m.graph.nodes)
    return SolveReport(distribution=JointDistribution(variables=variables, table=table))


def cycle_breaking_sets(m: CausalModel) -> list[tuple[str, ...]]:
    """Every minimum-size set of observed nodes whose splitting leaves no cycle."""

    if is_acyclic(m.graph):
        return [()]
    observed = m.observed
    if not is_acyclic(m.graph.without(observed)):
        latent_cycles = directed_cycles(m.graph.without(observed))
        raise SolveError(
            f"Cycles {latent_cycles} contain no observed node; they cannot be split."
        )
    for size in range(1, len(observed) + 1):
        found = [
            subset
            for subset in itertools.combinations(observed, size)
            if is_acyclic(m.graph.without(subset))
        ]
        if found:
            return found
    raise SolveError("No set of observed nodes breaks every cycle.")  # pragma: no cover


def _fresh_name(taken: Collection[str], base: str) -> str:
    candidate = base
    while candidate in taken:
        candidate += "'"
    return candidate


def _split(m: CausalModel, n: str) -> CausalModel:
    taken = set(m.graph.names) | set(m.noise)
    copy = _fresh_name(taken, f"{n}'")
    noise_name = _fresh_name(taken | {copy}, f"E_{copy}")
    size = m.graph.node(n).alphabet_size

    edges = {(copy if parent == n else parent, child) for parent, child in m.graph.edges}
    graph = Graph(
        nodes=m.graph.nodes + (Node(copy, size, NodeKind.LATENT),),
        edges=frozenset(edges),
    )
    children = set(m.graph.children(n))
    mechanisms = {
        node: mech.rename(n, copy) if node in children else mech
        for node, mech in m.mechanisms.items()
    }
    mechanisms[copy] = Mechanism(node=copy, expression=Ref(noise_name), noise_parent=noise_name)
    noise = dict(m.noise)
    noise[noise_name] = uniform(noise_name, size)
    return CausalModel(
        graph=graph,
        mechanisms=mechanisms,
        noise=noise,
        name=m.name,
        split_copies={**m.split_copies, copy: n},
    )


def split_node(m: CausalModel, n: str) -> CausalModel:
    """Split observed ``n`` into ``n`` (incoming edges) and a uniform source ``n'`` (outgoing)."""

    if not m.graph.node(n).observed:
        raise ModelError(f"Only observed nodes can be split; '{n}' is latent.")
    if n not in descendants(m.graph, n):
        raise ModelError(f"'{n}' does not lie on any directed cycle.")
    return _split(m, n)


def solve_cyclic(m: CausalModel, split: Collection[str] | None = None) -> SolveReport:
    """Solve by node splitting, post-selection on agreement, and renormalisation."""

    if is_acyclic(m.graph):
        return solve_acyclic(m)
    if split is None:
        chosen = cycle_breaking_sets(m)[0]
    else:
        chosen = m.graph.sort(split)
        for node in chosen:
            if not m.graph.node(node).observed:
                raise SolveError(f"Cannot split latent node '{node}'.")
        if not is_acyclic(m.graph.without(chosen)):
            raise SolveError(f"Splitting {list(chosen)} leaves a directed cycle.")

    split_model = m
    copies: list[tuple[str, str]] = []
    for node in chosen:
        split_model = _split(split_model, node)
        copies.append((node, split_model.graph.names[-1]))

    joint = solve_acyclic(split_model).distribution
    positions = {name: i for i, name in enumerate(joint.names)}
    kept = {
        row: mass
        for row, mass in joint.support()
        if all(row[positions[a]] == row[positions[b]] for a, b in copies)
    }
    weight = sum(kept.values(), Fraction(0))
    logger.debug("Split %s of '%s': post-selection weight %s", chosen, m.name, weight)
    if weight == 0:
        raise SolveError(
            f"Model '{m.name}' has no consistent solution: post-selection weight is 0."
        )
    renormalised = JointDistribution(
        variables=joint.variables,
        table={row: mass / weight for row, mass in kept.items()},
    )
    return SolveReport(
        distribution=marginal(renormalised, m.endogenous),
        split=tuple(chosen),
        weight=weight,
    )


def solve(m: CausalModel, *, audit: bool = False) -> SolveReport:
    """Solve with the acyclic or the splitting method as the graph requires.

    With ``audit`` the d-separation property is checked on the result and any
    failures are attached to the report and logged.
    """

    report = solve_acyclic(m) if is_acyclic(m.graph) else solve_cyclic(m)
    logger.debug("Solved '%s' with method %s", m.name, report.method)
    if not audit or not m.observed:
        return report
    violations = check_dsep_property(m.graph, marginal(report.distribution, m.observed))
    if violations:
        logger.warning(
            "Model '%s' violates the d-separation property: %s",
            m.name,
            ", ".join(str(v) for v in violations),
        )
    return SolveReport(
        distribution=report.distribution,
        split=report.split,
        weight=report.weight,
        dsep_violations=tuple(violations),
    )


def observed_distribution(m: CausalModel) -> JointDistribution:
    return marginal(solve(m).distribution, m.observed)


def split_invariance(m: CausalModel) -> bool:
    """True iff every minimum cycle-breaking set yields the same distribution."""

    results = [solve_cyclic(m, split=s).distribution for s in cycle_breaking_sets(m)]
    return all(result == results[0] for result in results[1:])


def _consistent(m: CausalModel, values: Mapping[str, int]) -> bool:
    return all(
        mech.expression.evaluate(values, m.graph.node(node).alphabet_size)
        == values[node]
        for node, mech in m.mechanisms.items()
    )


def enumerate_consistent_assignments(
    m: CausalModel, noise: Mapping[str, int]
) -> list[dict[str, int]]:
    """Every full assignment of the graph nodes that satisfies all mechanisms."""

    missing = sorted(set(m.noise) - set(noise))
    if missing:
        raise SolveError(f"Noise values missing for {missing}.")
    _require_fixed(m)
    variables = [Variable(n.name, n.alphabet_size) for n in m.graph.nodes]
    solutions = []
    for row in all_rows(variables):
        values = dict(noise)
        values.update(zip(m.graph.names, row))
        if _consistent(m, values):
            solutions.append(dict(zip(m.graph.names, row)))
    return solutions


def solution_multiplicity(m: CausalModel) -> dict[tuple[int, ...], int]:
    """Number of consistent assignments per noise assignment of positive probability.

    Keys list noise values in the model's noise declaration order.
    """

    return {
        tuple(values[name] for name in m.noise): len(
            enumerate_consistent_assignments(m, values)
        )
        for values, _ in _noise_assignments(m)
    }


def with_noise(m: CausalModel, name: str, distribution: JointDistribution) -> CausalModel:
    """Replace the distribution of noise variable ``name``."""

    if name not in m.noise:
        raise ModelError(f"Unknown noise variable '{name}'.")
    if distribution.variables != m.noise[name].variables:
        raise ModelError(f"Replacement for '{name}' must keep its single variable.")
    return CausalModel(
        graph=m.graph,
        mechanisms=m.mechanisms,
        noise={**m.noise, name: distribution},
        name=m.name,
        split_copies=m.split_copies,
    )


def _triples(observed: tuple[str, ...]) -> Iterator[Triple]:
    """Disjoint (X, Y, Z) over ``observed`` with X, Y nonempty, each unordered {X, Y} once."""

    found = []
    for labels in itertools.product(range(4), repeat=len(observed)):
        groups: list[list[int]] = [[], [], []]
        for position, label in enumerate(labels):
            if label < 3:
                groups[label].append(position)
        x, y, z = groups
        if x and y and x < y:
            found.append((len(z), x, y, z))
    for _, x, y, z in sorted(found):
        yield Triple(
            x=tuple(observed[i] for i in x),
            y=tuple(observed[i] for i in y),
            z=tuple(observed[i] for i in z),
        )


def _check_variables(g: Graph, p: JointDistribution) -> None:
    if set(p.names) != set(g.observed):
        raise ModelError(
            f"Distribution variables {list(p.names)} differ from observed nodes {list(g.observed)}."
        )


def check_dsep_property(g: Graph, p: JointDistribution) -> list[Triple]:
    """Every d-separated triple whose conditional independence fails in ``p``."""

    _check_variables(g, p)
    try:
        return [
            triple
            for triple in _triples(g.observed)
            if d_separated(g, triple.x, triple.y, triple.z)
            and not is_independent(p, triple.x, triple.y, triple.z)
        ]
    except DistributionError as exc:  # pragma: no cover - guarded by _check_variables
        raise ModelError(str(exc)) from exc


def detect_fine_tuning(g: Graph, p: JointDistribution) -> list[Triple]:
    """Every d-connected triple that is nevertheless independent in ``p``."""

    _check_variables(g, p)
    return [
        triple
        for triple in _triples(g.observed)
        if not d_separated(g, triple.x, triple.y, triple.z)
        and is_independent(p, triple.x, triple.y, triple.z)
    ]
