"""do-interventions and the affects relations built on them."""

from __future__ import annotations

import itertools
import logging
from collections.abc import Collection, Iterator, Mapping
from dataclasses import dataclass, field
from fractions import Fraction

from causaloop.distribution import (
    JointDistribution,
    Row,
    Variable,
    all_rows,
    format_fraction,
    marginal,
    probability,
)
from causaloop.mechanisms import Const, FreeInput, Mechanism
from causaloop.scm import CausalModel, solve

logger = logging.getLogger(__name__)

RelationKey = tuple[tuple[str, ...], tuple[str, ...], tuple[str, ...]]


class InterventionError(RuntimeError):
    """Raised for invalid intervention targets or affects queries."""


def _render_group(names: Collection[str]) -> str:
    return ",".join(names)


@dataclass(frozen=True, slots=True)
class InterventionTarget:
    """Observed nodes forced by do(); ``values`` is None for free (unfixed) inputs."""

    nodes: tuple[str, ...]
    values: Mapping[str, int] | None = None

    @classmethod
    def fixed(cls, values: Mapping[str, int]) -> InterventionTarget:
        return cls(nodes=tuple(values), values=dict(values))


def _check_observed(m: CausalModel, names: Collection[str]) -> None:
    for name in names:
        if name not in m.graph:
            raise InterventionError(f"Unknown node '{name}'.")
        if not m.graph.node(name).observed:
            raise InterventionError(f"Cannot intervene on latent node '{name}'.")


def apply_do(m: CausalModel, t: InterventionTarget) -> CausalModel:
    """Cut the incoming edges of every target and override its mechanism."""

    _check_observed(m, t.nodes)
    targets = set(t.nodes)
    if t.values is not None:
        if set(t.values) != targets:
            raise InterventionError("Intervention values must cover exactly the targets.")
        for name, value in t.values.items():
            size = m.graph.node(name).alphabet_size
            if not 0 <= value < size:
                raise InterventionError(
                    f"do({name}={value}) is outside the alphabet of '{name}'."
                )

    mechanisms: dict[str, Mechanism] = dict(m.mechanisms)
    dropped_noise = set()
    for name in targets:
        original = m.mechanisms[name]
        if original.noise_parent is not None:
            dropped_noise.add(original.noise_parent)
        expression = FreeInput() if t.values is None else Const(t.values[name])
        mechanisms[name] = Mechanism(node=name, expression=expression)

    return CausalModel(
        graph=m.graph.remove_incoming(targets),
        mechanisms=mechanisms,
        noise={k: v for k, v in m.noise.items() if k not in dropped_noise},
        name=m.name,
        split_copies=m.split_copies,
    )


def post_intervention_distribution(
    m: CausalModel, t: InterventionTarget
) -> JointDistribution:
    """The distribution of the non-target observed nodes under do(t)."""

    if t.values is None:
        raise InterventionError("A post-intervention distribution needs fixed values.")
    remaining = [name for name in m.observed if name not in t.nodes]
    if not remaining:
        raise InterventionError("Every observed node is intervened on; nothing to report.")
    return marginal(solve(apply_do(m, t)).distribution, remaining)


@dataclass(frozen=True, slots=True)
class Witness:
    """An (x, z, y) with P_do(xz)(y) = lhs differing from the baseline rhs."""

    x: tuple[tuple[str, int], ...]
    z: tuple[tuple[str, int], ...]
    y: tuple[tuple[str, int], ...]
    lhs: Fraction
    rhs: Fraction

    def __str__(self) -> str:
        def part(key: str, pairs: tuple[tuple[str, int], ...]) -> str:
            return key + "(" + ",".join(f"{n}={v}" for n, v in pairs) + ")"

        return (
            part("x", self.x)
            + part("z", self.z)
            + part("y", self.y)
            + f":{format_fraction(self.lhs)}!={format_fraction(self.rhs)}"
        )


@dataclass(frozen=True, slots=True)
class AffectsRelation:
    """Whether ``source`` affects ``target`` given do(``do``); first-order when ``do`` is empty."""

    source: tuple[str, ...]
    target: tuple[str, ...]
    do: tuple[str, ...] = ()
    holds: bool = False
    witness: Witness | None = None

    @property
    def higher_order(self) -> bool:
        return bool(self.do)

    @property
    def key(self) -> RelationKey:
        return self.source, self.target, self.do

    @property
    def label(self) -> str:
        text = f"{_render_group(self.source)}->{_render_group(self.target)}"
        if self.do:
            text += f"|do({_render_group(self.do)})"
        return text

    def __str__(self) -> str:
        witness = str(self.witness) if self.witness is not None else "-"
        return f"{self.label} holds={int(self.holds)} witness={witness}"


class _Evaluator:
    """Caches the observational and post-do distributions of one model."""

    def __init__(self, m: CausalModel) -> None:
        self.model = m
        self._observational: JointDistribution | None = None
        self._post_do: dict[tuple[tuple[str, int], ...], JointDistribution] = {}

    def observational(self) -> JointDistribution:
        if self._observational is None:
            self._observational = marginal(solve(self.model).distribution, self.model.observed)
        return self._observational

    def under(self, assignment: Mapping[str, int]) -> JointDistribution:
        if not assignment:
            return self.observational()
        key = tuple(sorted(assignment.items()))
        if key not in self._post_do:
            self._post_do[key] = post_intervention_distribution(
                self.model, InterventionTarget.fixed(assignment)
            )
        return self._post_do[key]


def _validated(
    m: CausalModel, x: Collection[str], y: Collection[str], z: Collection[str]
) -> tuple[tuple[str, ...], tuple[str, ...], tuple[str, ...]]:
    xs, ys, zs = set(x), set(y), set(z)
    if not xs or not ys:
        raise InterventionError("Affects relations need nonempty X and Y.")
    if xs & ys or xs & zs or ys & zs:
        raise InterventionError("X, Y and Z must be pairwise disjoint.")
    _check_observed(m, xs | ys | zs)
    return m.graph.sort(xs), m.graph.sort(ys), m.graph.sort(zs)


def _rows(m: CausalModel, names: tuple[str, ...]) -> list[Row]:
    return list(all_rows(Variable(n, m.graph.node(n).alphabet_size) for n in names))


def _evaluate(
    evaluator: _Evaluator,
    x: tuple[str, ...],
    y: tuple[str, ...],
    z: tuple[str, ...],
) -> AffectsRelation:
    m = evaluator.model
    y_rows = _rows(m, y)
    for z_row in _rows(m, z):
        z_values = dict(zip(z, z_row))
        baseline = evaluator.under(z_values)
        for x_row in _rows(m, x):
            post = evaluator.under({**dict(zip(x, x_row)), **z_values})
            for y_row in y_rows:
                event = dict(zip(y, y_row))
                lhs = probability(post, event)
                rhs = probability(baseline, event)
                if lhs != rhs:
                    witness = Witness(
                        x=tuple(zip(x, x_row)),
                        z=tuple(zip(z, z_row)),
                        y=tuple(zip(y, y_row)),
                        lhs=lhs,
                        rhs=rhs,
                    )
                    return AffectsRelation(x, y, z, holds=True, witness=witness)
    return AffectsRelation(x, y, z, holds=False)


def affects_given_do(
    m: CausalModel, x: Collection[str], y: Collection[str], z: Collection[str]
) -> AffectsRelation:
    """Does do(X) shift Y relative to the baseline do(Z) alone?

    With Z empty the baseline is the observational distribution, so this is
    exactly :func:`affects`.
    """

    xs, ys, zs = _validated(m, x, y, z)
    return _evaluate(_Evaluator(m), xs, ys, zs)


def affects(m: CausalModel, x: Collection[str], y: Collection[str]) -> AffectsRelation:
    return affects_given_do(m, x, y, ())


@dataclass(frozen=True, slots=True)
class AffectsSet:
    """Every affects relation of a model whose sets are at most ``max_size`` large."""

    model: str
    max_size: int
    observed: tuple[str, ...]
    relations: tuple[AffectsRelation, ...]
    _by_key: dict[RelationKey, AffectsRelation] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        by_key: dict[RelationKey, AffectsRelation] = {}
        for relation in self.relations:
            if relation.key in by_key:
                raise InterventionError(f"Relation {relation.label} is listed twice.")
            by_key[relation.key] = relation
        object.__setattr__(self, "_by_key", by_key)

    def lookup(
        self,
        source: Collection[str],
        target: Collection[str],
        do: Collection[str] = (),
    ) -> AffectsRelation | None:
        key = tuple(self._sorted(source)), tuple(self._sorted(target)), tuple(self._sorted(do))
        return self._by_key.get(key)

    def holders(self, *, higher_order: bool = False) -> Iterator[AffectsRelation]:
        for relation in self.relations:
            if relation.holds and relation.higher_order == higher_order:
                yield relation

    def _sorted(self, names: Collection[str]) -> list[str]:
        order = {name: i for i, name in enumerate(self.observed)}
        return sorted(set(names), key=lambda n: order.get(n, len(order)))


def _subsets(names: tuple[str, ...], max_size: int) -> list[tuple[str, ...]]:
    return [
        subset
        for size in range(1, min(max_size, len(names)) + 1)
        for subset in itertools.combinations(names, size)
    ]


def enumerate_affects(m: CausalModel, max_size: int) -> AffectsSet:
    """Evaluate every first-order and higher-order relation within the size bound."""

    if max_size < 1:
        raise InterventionError("max_size must be at least 1.")
    observed = m.observed
    subsets = _subsets(observed, max_size)
    evaluator = _Evaluator(m)
    relations = []
    for x, y in itertools.permutations(subsets, 2):
        if set(x) & set(y):
            continue
        relations.append(_evaluate(evaluator, x, y, ()))
        for z in subsets:
            if not set(z) & (set(x) | set(y)):
                relations.append(_evaluate(evaluator, x, y, z))
    relations.sort(key=lambda r: r.label)
    logger.debug(
        "Evaluated %d affects relations of '%s' (max size %d)",
        len(relations),
        m.name,
        max_size,
    )
    return AffectsSet(
        model=m.name, max_size=max_size, observed=observed, relations=tuple(relations)
    )


@dataclass(frozen=True, slots=True)
class HigherOrder:
    """A singleton-source higher-order relation x -> Y given do(Z)."""

    source: str
    target: tuple[str, ...]
    do: tuple[str, ...]
    derived: bool

    @property
    def label(self) -> str:
        return f"{self.source}->{_render_group(self.target)}|do({_render_group(self.do)})"


def derived_higher_order(a: AffectsSet) -> list[HigherOrder]:
    """Higher-order relations with a single source that the set supports.

    holds({x} ∪ Z -> Y) together with not holds(Z -> Y) licenses x -> Y given
    do(Z); directly evaluated holders with a singleton source are merged in.
    """

    found: dict[tuple[str, tuple[str, ...], tuple[str, ...]], HigherOrder] = {}
    for relation in a.holders():
        if len(relation.source) < 2:
            continue
        for x in relation.source:
            rest = tuple(n for n in relation.source if n != x)
            reduced = a.lookup(rest, relation.target)
            if reduced is not None and not reduced.holds:
                key = (x, relation.target, rest)
                found.setdefault(key, HigherOrder(x, relation.target, rest, derived=True))
    for relation in a.holders(higher_order=True):
        if len(relation.source) == 1:
            key = (relation.source[0], relation.target, relation.do)
            found.setdefault(
                key, HigherOrder(relation.source[0], relation.target, relation.do, derived=False)
            )
    return sorted(found.values(), key=lambda h: h.label)
