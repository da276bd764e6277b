"""Line-oriented model files: parsing, canonical serialization and shipped fixtures.

A file has the sections ``[nodes]``, ``[edges]``, ``[mechanisms]``, ``[noise]``
and an optional ``[embedding dim=d]``; ``#`` starts a comment::

    [nodes]
    L latent alphabet=2
    A observed alphabet=2
    [edges]
    L -> A
    [mechanisms]
    L = E_L
    A = L
    [noise]
    E_L ~ uniform
    [embedding dim=1]
    A = (0, -1)
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

from causaloop.distribution import (
    DistributionError,
    JointDistribution,
    Variable,
    format_fraction,
    parse_fraction,
    uniform,
)
from causaloop.graph import Graph, GraphError, Node, NodeKind
from causaloop.mechanisms import (
    And,
    Const,
    Expression,
    Mechanism,
    MechanismError,
    Not,
    Or,
    Ref,
    Table,
    Xor,
)
from causaloop.minkowski import Embedding, EmbeddingError, SpacetimePoint
from causaloop.scm import CausalModel, ModelError

FIXTURES = ("otp", "jam", "loop")

_SECTION = re.compile(r"^\[\s*(\w+)(?:\s+dim\s*=\s*(\d+))?\s*\]$")
_EDGE = re.compile(r"^(\S+)\s*->\s*(\S+)$")
_ASSIGN = re.compile(r"^([^\s=]+)\s*=\s*(.+)$")
_NOISE = re.compile(r"^([^\s~]+)\s*~\s*(.+)$")
_TOKEN = re.compile(r"\s*(?:(\d+)|([^\W\d][\w']*)|(.))")
_FUNCTIONS = {"xor": Xor, "and": And, "or": Or}
_SECTIONS = ("nodes", "edges", "mechanisms", "noise", "embedding")


class ModelFileError(RuntimeError):
    """Raised for malformed model files; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None) -> None:
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass(frozen=True, slots=True)
class ParsedModel:
    model: CausalModel
    embedding: Embedding | None = None


class _ExpressionParser:
    """Recursive-descent parser for mechanism expressions."""

    def __init__(self, text: str, line: int) -> None:
        self.line = line
        self.tokens = [match.group(match.lastindex or 0) for match in _TOKEN.finditer(text)]
        self.position = 0

    def error(self, message: str) -> ModelFileError:
        return ModelFileError(message, self.line)

    def peek(self, offset: int = 0) -> str | None:
        index = self.position + offset
        return self.tokens[index] if index < len(self.tokens) else None

    def take(self, expected: str | None = None) -> str:
        token = self.peek()
        if token is None:
            raise self.error("Unexpected end of expression.")
        if expected is not None and token != expected:
            raise self.error(f"Expected '{expected}' but found '{token}'.")
        self.position += 1
        return token

    def parse(self) -> Expression:
        expression = self.expression()
        if self.peek() is not None:
            raise self.error(f"Unexpected '{self.peek()}' after the expression.")
        return expression

    def expression(self) -> Expression:
        token = self.take()
        if token.isdigit():
            return Const(int(token))
        if token in _FUNCTIONS and self.peek() == "(":
            return _FUNCTIONS[token](tuple(self.arguments()))
        if token == "not" and self.peek() == "(":
            arguments = self.arguments()
            if len(arguments) != 1:
                raise self.error("not() takes exactly one argument.")
            return Not(arguments[0])
        if token == "table" and self.peek() == "{":
            return self.table()
        if not (token[0].isalpha() or token[0] == "_"):
            raise self.error(f"Unexpected '{token}' in expression.")
        return Ref(token)

    def arguments(self) -> list[Expression]:
        self.take("(")
        arguments = [self.expression()]
        while self.peek() == ",":
            self.take(",")
            arguments.append(self.expression())
        self.take(")")
        return arguments

    def integer(self) -> int:
        token = self.take()
        if not token.isdigit():
            raise self.error(f"Expected an integer but found '{token}'.")
        return int(token)

    def table(self) -> Table:
        self.take("{")
        args: tuple[str, ...] | None = None
        rows: list[tuple[tuple[int, ...], int]] = []
        while True:
            assignment: dict[str, int] = {}
            while self.peek() != ":":
                name = self.take()
                self.take("=")
                if name in assignment:
                    raise self.error(f"Table entry names '{name}' twice.")
                assignment[name] = self.integer()
            self.take(":")
            value = self.integer()
            if args is None:
                args = tuple(assignment)
            if set(assignment) != set(args):
                raise self.error("Every table entry must name the same arguments.")
            rows.append((tuple(assignment[arg] for arg in args), value))
            if self.peek() == ",":
                self.take(",")
                continue
            self.take("}")
            break
        try:
            return Table(args=args or (), rows=tuple(sorted(rows)))
        except MechanismError as exc:
            raise self.error(str(exc)) from exc


def _strip(raw: str) -> str:
    return raw.split("#", 1)[0].strip()


def _sections(text: str) -> tuple[dict[str, list[tuple[int, str]]], int | None, int | None]:
    sections: dict[str, list[tuple[int, str]]] = {}
    current: str | None = None
    dim: int | None = None
    dim_line: int | None = None
    for number, raw in enumerate(text.splitlines(), start=1):
        content = _strip(raw)
        if not content:
            continue
        header = _SECTION.match(content)
        if header:
            current = header.group(1).lower()
            if current not in _SECTIONS:
                raise ModelFileError(f"Unknown section [{current}].", number)
            if current in sections:
                raise ModelFileError(f"Section [{current}] appears twice.", number)
            if current == "embedding":
                if header.group(2) is None:
                    raise ModelFileError("The embedding section needs dim=d.", number)
                dim, dim_line = int(header.group(2)), number
            elif header.group(2) is not None:
                raise ModelFileError(f"Section [{current}] takes no dim.", number)
            sections[current] = []
            continue
        if current is None:
            raise ModelFileError("Content before the first section header.", number)
        sections[current].append((number, content))
    return sections, dim, dim_line


def _parse_nodes(lines: list[tuple[int, str]]) -> tuple[list[Node], dict[str, int]]:
    nodes: list[Node] = []
    declared: dict[str, int] = {}
    for number, content in lines:
        name, *options = content.replace(",", " ").split()
        kind = NodeKind.OBSERVED
        size = 2
        for option in options:
            if option in (NodeKind.OBSERVED, NodeKind.LATENT):
                kind = NodeKind(option)
            elif option.startswith("alphabet="):
                try:
                    size = int(option.removeprefix("alphabet="))
                except ValueError as exc:
                    raise ModelFileError(f"Malformed alphabet '{option}'.", number) from exc
            else:
                raise ModelFileError(f"Unknown node option '{option}'.", number)
        if name in declared:
            raise ModelFileError(f"Node '{name}' is declared twice.", number)
        try:
            nodes.append(Node(name, size, kind))
        except GraphError as exc:
            raise ModelFileError(str(exc), number) from exc
        declared[name] = number
    return nodes, declared


def _parse_edges(
    lines: list[tuple[int, str]], declared: dict[str, int]
) -> list[tuple[str, str]]:
    edges: list[tuple[str, str]] = []
    for number, content in lines:
        match = _EDGE.match(content)
        if not match:
            raise ModelFileError(f"Expected 'parent -> child', found '{content}'.", number)
        parent, child = match.groups()
        for endpoint in (parent, child):
            if endpoint not in declared:
                raise ModelFileError(f"Edge names unknown node '{endpoint}'.", number)
        if parent == child:
            raise ModelFileError(f"Self-loop on '{parent}' is not allowed.", number)
        if (parent, child) in edges:
            raise ModelFileError(f"Duplicate edge {parent} -> {child}.", number)
        edges.append((parent, child))
    return edges


def _parse_noise_specs(
    lines: list[tuple[int, str]], declared: dict[str, int]
) -> dict[str, tuple[int, list[Fraction] | None]]:
    specs: dict[str, tuple[int, list[Fraction] | None]] = {}
    for number, content in lines:
        match = _NOISE.match(content)
        if not match:
            raise ModelFileError(f"Expected 'E ~ uniform' or 'E ~ (p0, ...)', found '{content}'.", number)
        name, spec = match.group(1), match.group(2).strip()
        if name in declared or name in specs:
            raise ModelFileError(f"Noise name '{name}' is already taken.", number)
        if spec == "uniform":
            specs[name] = (number, None)
            continue
        if not (spec.startswith("(") and spec.endswith(")")):
            raise ModelFileError(f"Malformed noise distribution '{spec}'.", number)
        try:
            masses = [parse_fraction(part) for part in spec[1:-1].split(",")]
        except DistributionError as exc:
            raise ModelFileError(str(exc), number) from exc
        if any(mass < 0 for mass in masses):
            raise ModelFileError(f"Noise '{name}' has a negative probability.", number)
        if sum(masses) != 1:
            raise ModelFileError(f"Noise '{name}' is not normalised.", number)
        specs[name] = (number, masses)
    return specs


def _noise_distribution(name: str, masses: list[Fraction] | None, size: int) -> JointDistribution:
    if masses is None:
        return uniform(name, size)
    return JointDistribution(
        variables=(Variable(name, len(masses)),),
        table={(value,): mass for value, mass in enumerate(masses)},
    )


def _parse_point(content: str, dim: int, number: int) -> SpacetimePoint:
    if not (content.startswith("(") and content.endswith(")")):
        raise ModelFileError(f"Expected a point '(t, x1, ...)', found '{content}'.", number)
    try:
        coordinates = [parse_fraction(part) for part in content[1:-1].split(",")]
    except DistributionError as exc:
        raise ModelFileError(str(exc), number) from exc
    if len(coordinates) != dim + 1:
        raise ModelFileError(
            f"Expected {dim + 1} coordinates for dim={dim}, found {len(coordinates)}.", number
        )
    return SpacetimePoint(coordinates[0], tuple(coordinates[1:]))


def parse_model(text: str, name: str = "model") -> ParsedModel:
    """Parse a model file, reporting the first error with its line number."""

    sections, dim, dim_line = _sections(text)
    if "nodes" not in sections:
        raise ModelFileError("A model needs a [nodes] section.")
    nodes, declared = _parse_nodes(sections["nodes"])
    edges = _parse_edges(sections.get("edges", []), declared)
    noise_specs = _parse_noise_specs(sections.get("noise", []), declared)
    kinds = {node.name: node for node in nodes}
    parents = {node.name: {p for p, c in edges if c == node.name} for node in nodes}

    mechanisms: dict[str, Mechanism] = {}
    noise_sizes: dict[str, int] = {}
    consumers: dict[str, str] = {}
    for number, content in sections.get("mechanisms", []):
        match = _ASSIGN.match(content)
        if not match:
            raise ModelFileError(f"Expected 'node = expression', found '{content}'.", number)
        node, source = match.groups()
        if node not in declared:
            raise ModelFileError(f"Mechanism for unknown node '{node}'.", number)
        if node in mechanisms:
            raise ModelFileError(f"Node '{node}' has two mechanisms.", number)
        expression = _ExpressionParser(source, number).parse()

        noise_parent = None
        for used in sorted(expression.names()):
            if used in parents[node]:
                continue
            if used in noise_specs:
                if noise_parent is not None:
                    raise ModelFileError(f"'{node}' reads two noise variables.", number)
                if used in consumers:
                    raise ModelFileError(
                        f"Noise '{used}' already feeds '{consumers[used]}'.", number
                    )
                noise_parent = used
                consumers[used] = node
                masses = noise_specs[used][1]
                noise_sizes[used] = len(masses) if masses is not None else kinds[node].alphabet_size
            elif used in declared:
                raise ModelFileError(f"'{used}' is not a parent of '{node}'.", number)
            else:
                raise ModelFileError(f"Unknown name '{used}' in mechanism of '{node}'.", number)
        ignored = sorted(parents[node] - expression.names())
        if ignored:
            raise ModelFileError(f"Mechanism of '{node}' ignores parents {ignored}.", number)
        if isinstance(expression, Table):
            sizes = {p: kinds[p].alphabet_size for p in parents[node]}
            if noise_parent is not None:
                sizes[noise_parent] = noise_sizes[noise_parent]
            try:
                expression.check_total(sizes)
            except MechanismError as exc:
                raise ModelFileError(str(exc), number) from exc
        mechanisms[node] = Mechanism(node=node, expression=expression, noise_parent=noise_parent)

    for node, number in declared.items():
        if node not in mechanisms:
            raise ModelFileError(f"Node '{node}' has no mechanism.", number)
    for noise_name, (number, _) in noise_specs.items():
        if noise_name not in consumers:
            raise ModelFileError(f"Noise '{noise_name}' feeds no node.", number)

    noise = {
        noise_name: _noise_distribution(noise_name, masses, noise_sizes[noise_name])
        for noise_name, (_, masses) in noise_specs.items()
    }
    try:
        model = CausalModel(
            graph=Graph.build(nodes, edges),
            mechanisms={node.name: mechanisms[node.name] for node in nodes},
            noise=noise,
            name=name,
        )
    except (GraphError, ModelError, DistributionError) as exc:
        raise ModelFileError(str(exc)) from exc

    embedding = None
    if dim is not None:
        locations: dict[str, SpacetimePoint] = {}
        for number, content in sections["embedding"]:
            match = _ASSIGN.match(content)
            if not match:
                raise ModelFileError(f"Expected 'node = (t, x1, ...)', found '{content}'.", number)
            node, value = match.group(1), match.group(2).strip()
            if node not in declared or not kinds[node].observed:
                raise ModelFileError(f"Only observed nodes can be embedded; got '{node}'.", number)
            if node in locations:
                raise ModelFileError(f"Node '{node}' is embedded twice.", number)
            locations[node] = _parse_point(value, dim, number)
        try:
            embedding = Embedding(dim=dim, locations=locations)
        except EmbeddingError as exc:
            raise ModelFileError(str(exc), dim_line) from exc
    return ParsedModel(model=model, embedding=embedding)


def _format_rational(value: Fraction) -> str:
    return str(value.numerator) if value.denominator == 1 else format_fraction(value)


def serialize_model(parsed: ParsedModel) -> str:
    """The canonical text of a model; parsing it gives back an equal model."""

    model = parsed.model
    graph = model.graph
    lines = ["[nodes]"]
    lines += [f"{n.name} {n.kind} alphabet={n.alphabet_size}" for n in graph.nodes]
    lines.append("[edges]")
    lines += [f"{parent} -> {child}" for parent, child in graph.sorted_edges()]
    lines.append("[mechanisms]")
    lines += [str(model.mechanisms[name]) for name in graph.names]
    lines.append("[noise]")
    for noise_name, distribution in model.noise.items():
        size = distribution.variables[0].size
        if distribution == uniform(noise_name, size):
            lines.append(f"{noise_name} ~ uniform")
        else:
            masses = [distribution.table.get((value,), Fraction(0)) for value in range(size)]
            lines.append(f"{noise_name} ~ (" + ", ".join(map(format_fraction, masses)) + ")")
    if parsed.embedding is not None:
        embedding = parsed.embedding
        lines.append(f"[embedding dim={embedding.dim}]")
        for name in graph.names:
            if name in embedding.locations:
                location = embedding.locations[name]
                coordinates = ", ".join(_format_rational(c) for c in (location.t, *location.x))
                lines.append(f"{name} = ({coordinates})")
    return "\n".join(lines) + "\n"


def load_model(path: Path) -> ParsedModel:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ModelFileError(f"Cannot read model file {path}: {exc}") from exc
    return parse_model(text, name=path.stem)


def fixture_text(name: str) -> str:
    """Text of a shipped fixture: ``otp``, ``jam`` or ``loop``."""

    if name not in FIXTURES:
        raise ModelFileError(f"Unknown fixture '{name}'; choose from {', '.join(FIXTURES)}.")
    return resources.files("causaloop").joinpath("fixtures", f"{name}.model").read_text()


def load_fixture(name: str) -> ParsedModel:
    return parse_model(fixture_text(name), name=name)
