"""Directed graphs (cycles permitted), reachability and d-separation."""

from __future__ import annotations

import itertools
from collections.abc import Collection, Iterable, Iterator
from dataclasses import dataclass, field
from enum import StrEnum

import networkx as nx


class GraphError(RuntimeError):
    """Raised when a graph is malformed or queried with invalid node sets."""


class NodeKind(StrEnum):
    OBSERVED = "observed"
    LATENT = "latent"


@dataclass(frozen=True, slots=True)
class Node:
    """A finite random variable; its values are 0..alphabet_size-1."""

    name: str
    alphabet_size: int = 2
    kind: NodeKind = NodeKind.OBSERVED

    def __post_init__(self) -> None:
        if not self.name:
            raise GraphError("Node names cannot be empty.")
        if self.alphabet_size < 1:
            raise GraphError(
                f"Node '{self.name}' needs an alphabet of at least one value."
            )

    @property
    def observed(self) -> bool:
        return self.kind is NodeKind.OBSERVED


@dataclass(frozen=True, slots=True)
class Path:
    """A simple path; ``forward[i]`` is True when the edge points nodes[i] -> nodes[i+1]."""

    nodes: tuple[str, ...]
    forward: tuple[bool, ...]

    def __str__(self) -> str:
        parts = [self.nodes[0]]
        for step, node in zip(self.forward, self.nodes[1:]):
            parts.append("->" if step else "<-")
            parts.append(node)
        return " ".join(parts)


@dataclass(frozen=True, slots=True)
class Graph:
    """An immutable directed graph over named nodes.

    Node order is the declaration order and drives every deterministic
    ordering produced by this module.
    """

    nodes: tuple[Node, ...]
    edges: frozenset[tuple[str, str]]
    _digraph: nx.DiGraph = field(init=False, repr=False, compare=False)
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        index: dict[str, int] = {}
        for position, node in enumerate(self.nodes):
            if node.name in index:
                raise GraphError(f"Duplicate node name '{node.name}'.")
            index[node.name] = position

        digraph = nx.DiGraph()
        digraph.add_nodes_from(node.name for node in self.nodes)
        for parent, child in sorted(
            self.edges, key=lambda edge: (index.get(edge[0], -1), index.get(edge[1], -1))
        ):
            for endpoint in (parent, child):
                if endpoint not in index:
                    raise GraphError(
                        f"Edge {parent} -> {child} names unknown node '{endpoint}'."
                    )
            if parent == child:
                raise GraphError(f"Self-loop on '{parent}' is not allowed.")
            digraph.add_edge(parent, child)

        object.__setattr__(self, "_digraph", digraph)
        object.__setattr__(self, "_index", index)

    @classmethod
    def build(
        cls, nodes: Iterable[Node], edges: Iterable[tuple[str, str]] = ()
    ) -> Graph:
        """Construct a graph, rejecting duplicate edges instead of merging them."""

        seen: set[tuple[str, str]] = set()
        for edge in edges:
            if edge in seen:
                raise GraphError(f"Duplicate edge {edge[0]} -> {edge[1]}.")
            seen.add(edge)
        return cls(nodes=tuple(nodes), edges=frozenset(seen))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(node.name for node in self.nodes)

    @property
    def observed(self) -> tuple[str, ...]:
        return tuple(node.name for node in self.nodes if node.observed)

    def node(self, name: str) -> Node:
        self._require(name)
        return self.nodes[self._index[name]]

    def index(self, name: str) -> int:
        self._require(name)
        return self._index[name]

    def __contains__(self, name: object) -> bool:
        return name in self._index

    def sort(self, names: Iterable[str]) -> tuple[str, ...]:
        """Return ``names`` in declaration order."""

        return tuple(sorted(set(names), key=self.index))

    def sorted_edges(self) -> list[tuple[str, str]]:
        return sorted(self.edges, key=lambda e: (self._index[e[0]], self._index[e[1]]))

    def parents(self, name: str) -> tuple[str, ...]:
        self._require(name)
        return self.sort(self._digraph.predecessors(name))

    def children(self, name: str) -> tuple[str, ...]:
        self._require(name)
        return self.sort(self._digraph.successors(name))

    def remove_incoming(self, names: Collection[str]) -> Graph:
        """Return the graph with every edge into ``names`` removed."""

        for name in names:
            self._require(name)
        return Graph(
            nodes=self.nodes,
            edges=frozenset(edge for edge in self.edges if edge[1] not in names),
        )

    def without(self, names: Collection[str]) -> Graph:
        """Return the induced subgraph on the nodes not in ``names``."""

        return Graph(
            nodes=tuple(node for node in self.nodes if node.name not in names),
            edges=frozenset(
                edge
                for edge in self.edges
                if edge[0] not in names and edge[1] not in names
            ),
        )

    def _require(self, name: str) -> None:
        if name not in self._index:
            raise GraphError(f"Unknown node '{name}'.")


def _check_nodes(g: Graph, names: Iterable[str]) -> frozenset[str]:
    collected = frozenset(names)
    for name in collected:
        g._require(name)
    return collected


def descendants(g: Graph, x: str) -> frozenset[str]:
    """Nodes reachable from ``x``; ``x`` itself only if it lies on a directed cycle."""

    g._require(x)
    reach = set(nx.descendants(g._digraph, x))
    if any(parent in reach for parent in g._digraph.predecessors(x)):
        reach.add(x)
    return frozenset(reach)


def ancestors(g: Graph, x: str) -> frozenset[str]:
    """Nodes with a directed path into ``x``; ``x`` itself only if it lies on a cycle."""

    g._require(x)
    reach = set(nx.ancestors(g._digraph, x))
    if any(child in reach for child in g._digraph.successors(x)):
        reach.add(x)
    return frozenset(reach)


def directed_path_exists(
    g: Graph, sources: Collection[str], targets: Collection[str]
) -> bool:
    """True iff some directed path leads from an element of ``sources`` to one of ``targets``."""

    source_set = _check_nodes(g, sources)
    target_set = _check_nodes(g, targets)
    if not source_set or not target_set:
        raise GraphError("Both node sets must be nonempty.")
    if source_set & target_set:
        raise GraphError("Source and target node sets must be disjoint.")
    return any(descendants(g, source) & target_set for source in source_set)


def is_acyclic(g: Graph) -> bool:
    return nx.is_directed_acyclic_graph(g._digraph)


def topological_order(g: Graph) -> tuple[str, ...]:
    """Topological order with ties broken by declaration order."""

    if not is_acyclic(g):
        raise GraphError("A topological order only exists for acyclic graphs.")
    return tuple(nx.lexicographical_topological_sort(g._digraph, key=g.index))


def directed_cycles(g: Graph) -> list[tuple[str, ...]]:
    """Every elementary directed cycle, each rotated to start at its earliest node."""

    cycles = []
    for cycle in nx.simple_cycles(g._digraph):
        start = min(range(len(cycle)), key=lambda i: g.index(cycle[i]))
        cycles.append(tuple(cycle[start:] + cycle[:start]))
    return sorted(cycles, key=lambda c: (len(c), [g.index(n) for n in c]))


def simple_paths(g: Graph, x: str, y: str) -> Iterator[Path]:
    """Every simple path between ``x`` and ``y``, ignoring edge orientation.

    A step across a two-cycle u <-> v yields one path per orientation.
    """

    skeleton = nx.Graph()
    skeleton.add_nodes_from(g.names)
    skeleton.add_edges_from(g.sorted_edges())
    for sequence in nx.all_simple_paths(skeleton, x, y):
        options = []
        for left, right in itertools.pairwise(sequence):
            step = []
            if (left, right) in g.edges:
                step.append(True)
            if (right, left) in g.edges:
                step.append(False)
            options.append(step)
        for forward in itertools.product(*options):
            yield Path(nodes=tuple(sequence), forward=tuple(forward))


def is_blocked(path: Path, z: Collection[str], z_ancestry: Collection[str]) -> bool:
    """Apply the chain/fork/collider blocking rules to the interior of ``path``.

    ``z_ancestry`` holds the nodes that are in ``z`` or have a descendant in it.
    """

    for i in range(1, len(path.nodes) - 1):
        middle = path.nodes[i]
        collider = path.forward[i - 1] and not path.forward[i]
        if collider:
            if middle not in z_ancestry:
                return True
        elif middle in z:
            return True
    return False


def _separation_inputs(
    g: Graph, x: Collection[str], y: Collection[str], z: Collection[str]
) -> tuple[tuple[str, ...], tuple[str, ...], frozenset[str], frozenset[str]]:
    xs, ys, zs = (_check_nodes(g, group) for group in (x, y, z))
    if not xs or not ys:
        raise GraphError("d-separation needs nonempty X and Y.")
    if xs & ys or xs & zs or ys & zs:
        raise GraphError("X, Y and Z must be pairwise disjoint.")
    ancestry = set(zs)
    for member in zs:
        ancestry |= ancestors(g, member)
    return g.sort(xs), g.sort(ys), zs, frozenset(ancestry)


def d_connecting_path(
    g: Graph, x: Collection[str], y: Collection[str], z: Collection[str] = ()
) -> Path | None:
    """The first path between ``x`` and ``y`` that ``z`` leaves unblocked, if any."""

    xs, ys, zs, ancestry = _separation_inputs(g, x, y, z)
    for source in xs:
        for target in ys:
            for path in simple_paths(g, source, target):
                if not is_blocked(path, zs, ancestry):
                    return path
    return None


def d_separated(
    g: Graph, x: Collection[str], y: Collection[str], z: Collection[str] = ()
) -> bool:
    """True iff every simple path between ``x`` and ``y`` is blocked by ``z``."""

    return d_connecting_path(g, x, y, z) is None
