"""Decide from affects relations alone whether any acyclic structure could explain them.

Two inference rules turn relations into directed-path requirements:

* a first-order relation S -> T that holds needs a directed path from some
  s in S to some t in T;
* a higher-order relation x -> Y given do(Z) needs a path from x to some y in Y.

A DAG realising every requirement exists iff some total order of the observed
nodes puts, for each requirement, one of its pairs in order (the transitive
tournament of that order then contains every needed path).
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import StrEnum

from causaloop.intervention import AffectsSet, derived_higher_order

logger = logging.getLogger(__name__)

DEFAULT_ORDER_CAP = 8

Pair = tuple[str, str]


class CertifierError(RuntimeError):
    """Raised when a certificate cannot be computed."""


class Verdict(StrEnum):
    CYCLIC = "cyclic"
    DAG = "dag"


@dataclass(frozen=True, slots=True)
class PathConstraint:
    """At least one of the directed paths in ``pairs`` must exist."""

    pairs: tuple[Pair, ...]
    rule: str = field(default="", compare=False)
    origin: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if not self.pairs:
            raise CertifierError("A path constraint needs at least one pair.")
        for source, target in self.pairs:
            if source == target:
                raise CertifierError(f"Path constraint pair ({source},{target}) is a loop.")

    def satisfied_by(self, position: dict[str, int]) -> bool:
        return any(position[u] < position[v] for u, v in self.pairs)

    def __str__(self) -> str:
        return " | ".join(f"{u}->{v}" for u, v in self.pairs)


def _sharpen(constraints: list[PathConstraint]) -> list[PathConstraint]:
    """Drop duplicates and every constraint implied by one with fewer pairs."""

    unique: list[PathConstraint] = []
    for constraint in constraints:
        if constraint not in unique:
            unique.append(constraint)
    sets = [frozenset(c.pairs) for c in unique]
    return [
        constraint
        for constraint, pairs in zip(unique, sets)
        if not any(other < pairs for other in sets)
    ]


def derive_path_constraints(a: AffectsSet) -> list[PathConstraint]:
    """Apply both inference rules to ``a`` and keep the sharpest constraints."""

    order = {name: i for i, name in enumerate(a.observed)}

    def ordered(pairs: set[Pair]) -> tuple[Pair, ...]:
        return tuple(sorted(pairs, key=lambda p: (order[p[0]], order[p[1]])))

    constraints = [
        PathConstraint(
            pairs=ordered({(s, t) for s in relation.source for t in relation.target}),
            rule="affects",
            origin=relation.label,
        )
        for relation in a.holders()
    ]
    constraints.extend(
        PathConstraint(
            pairs=ordered({(relation.source, t) for t in relation.target}),
            rule="higher-order",
            origin=relation.label,
        )
        for relation in derived_higher_order(a)
    )
    sharpened = _sharpen(constraints)
    logger.debug(
        "Derived %d path constraints for '%s' (%d before sharpening)",
        len(sharpened),
        a.model,
        len(constraints),
    )
    return sharpened


def _check_inputs(
    constraints: Sequence[PathConstraint], nodes: Sequence[str], cap: int
) -> None:
    if len(nodes) > cap:
        raise CertifierError(
            f"{len(nodes)} nodes exceed the exhaustive order search cap of {cap}."
        )
    known = set(nodes)
    for constraint in constraints:
        for pair in constraint.pairs:
            for endpoint in pair:
                if endpoint not in known:
                    raise CertifierError(f"Constraint {constraint} names unknown node '{endpoint}'.")


def _first_violated(
    constraints: Sequence[PathConstraint], order: tuple[str, ...]
) -> PathConstraint | None:
    position = {name: i for i, name in enumerate(order)}
    for constraint in constraints:
        if not constraint.satisfied_by(position):
            return constraint
    return None


def satisfiable_order(
    constraints: Sequence[PathConstraint],
    nodes: Sequence[str],
    cap: int = DEFAULT_ORDER_CAP,
) -> tuple[str, ...] | None:
    """The first total order of ``nodes`` (lexicographic by position) meeting every constraint."""

    _check_inputs(constraints, nodes, cap)
    for order in itertools.permutations(nodes):
        if _first_violated(constraints, order) is None:
            return order
    return None


@dataclass(frozen=True, slots=True)
class Refutation:
    order: tuple[str, ...]
    violated: PathConstraint


@dataclass(frozen=True, slots=True)
class CycleCertificate:
    verdict: Verdict
    constraints: tuple[PathConstraint, ...]
    order: tuple[str, ...] | None = None
    refutation: tuple[Refutation, ...] = ()

    def verify(self) -> bool:
        """Re-check the evidence directly against the constraints."""

        if self.verdict is Verdict.DAG:
            return self.order is not None and _first_violated(self.constraints, self.order) is None
        return bool(self.refutation) and all(
            _first_violated(self.constraints, step.order) == step.violated
            for step in self.refutation
        )


def certify_cycle(a: AffectsSet, cap: int = DEFAULT_ORDER_CAP) -> CycleCertificate:
    """Certify cyclicity, or return a witnessing order, from the affects relations."""

    constraints = derive_path_constraints(a)
    nodes = a.observed
    order = satisfiable_order(constraints, nodes, cap)
    if order is not None:
        return CycleCertificate(verdict=Verdict.DAG, constraints=tuple(constraints), order=order)

    refutation = []
    for candidate in itertools.permutations(nodes):
        violated = _first_violated(constraints, candidate)
        assert violated is not None
        refutation.append(Refutation(order=candidate, violated=violated))
    logger.debug("'%s' certified cyclic; %d orders refuted", a.model, len(refutation))
    return CycleCertificate(
        verdict=Verdict.CYCLIC,
        constraints=tuple(constraints),
        refutation=tuple(refutation),
    )
