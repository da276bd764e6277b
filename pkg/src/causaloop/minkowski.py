"""Causal order of (d+1)-Minkowski space-time and embedding compatibility.

Coordinates are exact rationals with c = 1. Future cones are closed, and every
comparison of a time separation with a spatial norm is made on squares, so no
irrational number is ever formed.

For d = 1 everything is decided exactly in light-cone coordinates u = t - x,
v = t + x, where the joint future of a finite set is the future of the point
(max u, max v). For d >= 2 the joint future of two space-like separated points
is not a cone, but it lies in the future of s exactly when s causally precedes
a point of the segment joining them. With three or more latest points that
segment test is only sufficient; containment is then refuted by an explicitly
verified witness or left unknown.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass
from enum import StrEnum
from fractions import Fraction

from causaloop.intervention import AffectsSet, derived_higher_order

logger = logging.getLogger(__name__)

DEFAULT_SEARCH_BUDGET = 256


class EmbeddingError(RuntimeError):
    """Raised for malformed points, dimension mismatches and incomplete embeddings."""


def _rational(value: Fraction) -> str:
    return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True, slots=True)
class SpacetimePoint:
    t: Fraction
    x: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        if not self.x:
            raise EmbeddingError("A space-time point needs at least one spatial coordinate.")

    @property
    def dim(self) -> int:
        return len(self.x)

    def __str__(self) -> str:
        return "(" + ", ".join(_rational(c) for c in (self.t, *self.x)) + ")"


def point(t: int | Fraction | str, *x: int | Fraction | str) -> SpacetimePoint:
    """Build a point from ints, Fractions or rational strings such as ``"-1/2"``."""

    return SpacetimePoint(Fraction(t), tuple(Fraction(c) for c in x))


def _same_dim(points: Iterable[SpacetimePoint], dim: int | None = None) -> int:
    dims = {p.dim for p in points}
    if dim is not None:
        dims.add(dim)
    if len(dims) > 1:
        raise EmbeddingError(f"Points of different dimensions: {sorted(dims)}.")
    return dims.pop() if dims else (dim or 0)


def _interval(p: SpacetimePoint, q: SpacetimePoint) -> tuple[Fraction, Fraction]:
    """(q.t - p.t, squared Minkowski interval from p to q)."""

    dt = q.t - p.t
    spatial = sum(((b - a) ** 2 for a, b in zip(p.x, q.x)), Fraction(0))
    return dt, dt * dt - spatial


def causally_precedes(p: SpacetimePoint, q: SpacetimePoint) -> bool:
    """True iff q lies in the closed future cone of p."""

    _same_dim((p, q))
    dt, interval = _interval(p, q)
    return dt >= 0 and interval >= 0


def joint_future_membership(s: Sequence[SpacetimePoint], q: SpacetimePoint) -> bool:
    if not s:
        raise EmbeddingError("A joint future needs at least one point.")
    _same_dim((*s, q))
    return all(causally_precedes(p, q) for p in s)


def light_cone_coordinates(p: SpacetimePoint) -> tuple[Fraction, Fraction]:
    if p.dim != 1:
        raise EmbeddingError("Light-cone coordinates are defined for d = 1 only.")
    return p.t - p.x[0], p.t + p.x[0]


def _from_light_cone(u: Fraction, v: Fraction) -> SpacetimePoint:
    return SpacetimePoint((u + v) / 2, ((v - u) / 2,))


def earliest_joint_point(s: Sequence[SpacetimePoint], dim: int) -> SpacetimePoint:
    """The point whose future cone is exactly the joint future of ``s`` (d = 1 only)."""

    if not s:
        raise EmbeddingError("A joint future needs at least one point.")
    _same_dim(s, dim)
    if dim != 1:
        raise EmbeddingError(
            f"No frame-independent earliest location exists in the joint future for d = {dim}."
        )
    coordinates = [light_cone_coordinates(p) for p in s]
    return _from_light_cone(max(u for u, _ in coordinates), max(v for _, v in coordinates))


def boost(p: SpacetimePoint, rapidity: Fraction) -> SpacetimePoint:
    """Apply u -> λu, v -> v/λ with λ = ``rapidity`` > 0 (a Lorentz boost for d = 1)."""

    if rapidity <= 0:
        raise EmbeddingError("A boost factor must be positive.")
    u, v = light_cone_coordinates(p)
    return _from_light_cone(u * rapidity, v / rapidity)


def latest_elements(points: Sequence[SpacetimePoint]) -> list[SpacetimePoint]:
    """Distinct points of ``points`` that do not causally precede another one.

    The joint future depends on these alone.
    """

    distinct = list(dict.fromkeys(points))
    return [
        p
        for p in distinct
        if not any(q != p and causally_precedes(p, q) for q in distinct)
    ]


class Containment(StrEnum):
    CONTAINED = "contained"
    NOT_CONTAINED = "not-contained"
    UNKNOWN = "unknown"


@dataclass(frozen=True, slots=True)
class ContainmentVerdict:
    """``witness`` lies in the joint future but outside the target future."""

    containment: Containment
    witness: SpacetimePoint | None = None


def _stereographic_grid(dim: int) -> Iterator[tuple[Fraction, ...]]:
    """Rational points of R^(dim-1), coarse grids first."""

    seen: set[tuple[Fraction, ...]] = set()
    for denominator in itertools.count(1):
        values = sorted(
            {Fraction(k, denominator) for k in range(-2 * denominator, 2 * denominator + 1)},
            key=lambda f: (abs(f), f),
        )
        for m in itertools.product(values, repeat=dim - 1):
            if m not in seen:
                seen.add(m)
                yield m


def unit_directions(dim: int) -> Iterator[tuple[Fraction, ...]]:
    """Rational unit vectors of R^dim: the axes, then inverse stereographic images."""

    axes = []
    for k in range(dim):
        for sign in (1, -1):
            axis = [Fraction(0)] * dim
            axis[k] = Fraction(sign)
            axes.append(tuple(axis))
    yield from axes
    if dim == 1:
        return
    for m in _stereographic_grid(dim):
        norm = sum((c * c for c in m), Fraction(0))
        n = tuple(2 * c / (norm + 1) for c in m) + ((norm - 1) / (norm + 1),)
        if n not in axes:
            yield n


def _ray_candidates(
    anchor: SpacetimePoint,
    direction: tuple[Fraction, ...],
    others: Sequence[SpacetimePoint],
) -> list[Fraction]:
    """Values of λ >= 0 covering every sign pattern of the linear membership tests."""

    breakpoints = {Fraction(0)}
    for other in others:
        dt = anchor.t - other.t
        dx = [a - b for a, b in zip(anchor.x, other.x)]
        alpha = dt * dt - sum((c * c for c in dx), Fraction(0))
        beta = dt - sum((c * n for c, n in zip(dx, direction)), Fraction(0))
        if beta != 0:
            breakpoints.add(-alpha / (2 * beta))
        breakpoints.add(-dt)
    ordered = sorted(b for b in breakpoints if b >= 0)
    midpoints = [(a + b) / 2 for a, b in itertools.pairwise(ordered)]
    return sorted(set(ordered) | set(midpoints) | {ordered[-1] + 1})


def _escape_witness(
    latest: Sequence[SpacetimePoint], s: SpacetimePoint, budget: int
) -> SpacetimePoint | None:
    dim = s.dim
    for anchor in latest:
        others = [p for p in latest if p != anchor] + [s]
        for direction in itertools.islice(unit_directions(dim), budget):
            for step in _ray_candidates(anchor, direction, others):
                q = SpacetimePoint(
                    anchor.t + step, tuple(a + step * n for a, n in zip(anchor.x, direction))
                )
                if joint_future_membership(latest, q) and not causally_precedes(s, q):
                    return q
    return None


def _precedes_segment(s: SpacetimePoint, p: SpacetimePoint, q: SpacetimePoint) -> bool:
    """True iff s causally precedes some point of the segment from p to q.

    The joint future of p and q lies in the future of every point of that
    segment, since the future cone is convex. For d >= 2 and space-like p, q
    the converse holds as well.
    """

    a0, a1 = p.t - s.t, q.t - p.t
    b0 = [pc - sc for pc, sc in zip(p.x, s.x)]
    b1 = [qc - pc for qc, pc in zip(q.x, p.x)]
    lo, hi = Fraction(0), Fraction(1)
    if a1 > 0:
        lo = max(lo, -a0 / a1)
    elif a1 < 0:
        hi = min(hi, -a0 / a1)
    elif a0 < 0:
        return False
    if lo > hi:
        return False

    def interval(lam: Fraction) -> Fraction:
        dt = a0 + lam * a1
        return dt * dt - sum(((c0 + lam * c1) ** 2 for c0, c1 in zip(b0, b1)), Fraction(0))

    candidates = [lo, hi]
    curvature = a1 * a1 - sum((c * c for c in b1), Fraction(0))
    if curvature < 0:
        slope = 2 * (a0 * a1 - sum((c0 * c1 for c0, c1 in zip(b0, b1)), Fraction(0)))
        vertex = -slope / (2 * curvature)
        if lo <= vertex <= hi:
            candidates.append(vertex)
    return any(interval(lam) >= 0 for lam in candidates)


def region_in_future(
    t: Sequence[SpacetimePoint],
    s: SpacetimePoint,
    dim: int,
    budget: int = DEFAULT_SEARCH_BUDGET,
) -> ContainmentVerdict:
    """Is the joint future of ``t`` contained in the future of ``s``?"""

    if not t:
        raise EmbeddingError("A joint future needs at least one point.")
    _same_dim((*t, s), dim)
    latest = latest_elements(t)

    if len(latest) == 1:
        only = latest[0]
        if causally_precedes(s, only):
            return ContainmentVerdict(Containment.CONTAINED)
        return ContainmentVerdict(Containment.NOT_CONTAINED, witness=only)

    if dim == 1:
        earliest = earliest_joint_point(latest, dim)
        if causally_precedes(s, earliest):
            return ContainmentVerdict(Containment.CONTAINED)
        return ContainmentVerdict(Containment.NOT_CONTAINED, witness=earliest)

    if any(causally_precedes(s, p) for p in latest) or any(
        _precedes_segment(s, p, q) for p, q in itertools.combinations(latest, 2)
    ):
        return ContainmentVerdict(Containment.CONTAINED)
    witness = _escape_witness(latest, s, budget)
    if witness is not None:
        logger.debug("Joint future escapes F%s at %s", s, witness)
        return ContainmentVerdict(Containment.NOT_CONTAINED, witness=witness)
    # The segment test is exact for two points, so only the witness is missing.
    if len(latest) == 2:
        logger.debug("No rational witness for F%s within %d directions", s, budget)
        return ContainmentVerdict(Containment.NOT_CONTAINED)
    return ContainmentVerdict(Containment.UNKNOWN)


def cone_equality_feasible(a: SpacetimePoint, c: SpacetimePoint, dim: int) -> bool:
    """Does some B have a future cone equal to the joint future of a and c?"""

    _same_dim((a, c), dim)
    return dim == 1 or len(latest_elements((a, c))) == 1


@dataclass(frozen=True, slots=True)
class Embedding:
    dim: int
    locations: Mapping[str, SpacetimePoint]

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise EmbeddingError("The spatial dimension must be at least 1.")
        for name, location in self.locations.items():
            if location.dim != self.dim:
                raise EmbeddingError(
                    f"Location of '{name}' has {location.dim} spatial coordinates, expected {self.dim}."
                )

    def colocated(self) -> list[tuple[str, str]]:
        return [
            (a, b)
            for (a, p), (b, q) in itertools.combinations(self.locations.items(), 2)
            if p == q
        ]

    def moved(self, node: str, location: SpacetimePoint) -> Embedding:
        return Embedding(dim=self.dim, locations={**self.locations, node: location})


class Policy(StrEnum):
    CONSERVATIVE = "conservative"
    REDUCED = "reduced"


class ViolationKind(StrEnum):
    NOT_IN_JOINT_FUTURE = "not-in-joint-future"
    JOINT_FUTURE_ESCAPES = "joint-future-escapes"
    UNDECIDED = "undecided"


@dataclass(frozen=True, slots=True)
class Violation:
    relation: str
    kind: ViolationKind
    witness: SpacetimePoint | None = None

    def __str__(self) -> str:
        witness = str(self.witness) if self.witness is not None else "-"
        return f"relation={self.relation} kind={self.kind} witness={witness}"


@dataclass(frozen=True, slots=True)
class EmbeddingReport:
    policy: Policy
    checked: tuple[str, ...]
    violations: tuple[Violation, ...] = ()

    @property
    def compatible(self) -> bool:
        return not self.violations


@dataclass(frozen=True, slots=True)
class _Requirement:
    label: str
    sources: tuple[str, ...]
    targets: tuple[str, ...]


def _implied_by_subset(a: AffectsSet, source: tuple[str, ...], target: tuple[str, ...]) -> bool:
    for size in range(1, len(source)):
        for subset in itertools.combinations(source, size):
            relation = a.lookup(subset, target)
            if relation is not None and relation.holds:
                return True
    return False


def _requirements(a: AffectsSet, policy: Policy) -> list[_Requirement]:
    requirements = []
    for relation in a.holders():
        if policy is Policy.REDUCED and _implied_by_subset(a, relation.source, relation.target):
            continue
        requirements.append(_Requirement(relation.label, relation.source, relation.target))
    if policy is Policy.REDUCED:
        requirements.extend(
            _Requirement(h.label, (h.source,), h.target) for h in derived_higher_order(a)
        )
    return requirements


def check_embedding(
    a: AffectsSet,
    e: Embedding,
    policy: Policy = Policy.CONSERVATIVE,
    *,
    budget: int = DEFAULT_SEARCH_BUDGET,
    allow_colocated: bool = False,
) -> EmbeddingReport:
    """Check that no signalling the relations imply leaves the space-time future.

    Each requirement S -> T demands that the joint future of T's locations lie
    inside the future of every s in S.
    """

    missing = [name for name in a.observed if name not in e.locations]
    if missing:
        raise EmbeddingError(f"The embedding gives no location for {missing}.")
    if not allow_colocated and (pairs := e.colocated()):
        rendered = ", ".join(f"{x}/{y}" for x, y in pairs)
        raise EmbeddingError(f"Co-located nodes {rendered}; pass allow_colocated to permit them.")

    requirements = _requirements(a, policy)
    violations = []
    for requirement in requirements:
        targets = [e.locations[name] for name in requirement.targets]
        for source in requirement.sources:
            verdict = region_in_future(targets, e.locations[source], e.dim, budget)
            if verdict.containment is Containment.CONTAINED:
                continue
            if verdict.containment is Containment.UNKNOWN:
                logger.warning(
                    "Containment for %s at %s undecided within a budget of %d directions",
                    requirement.label,
                    source,
                    budget,
                )
                kind = ViolationKind.UNDECIDED
            elif len(requirement.targets) == 1:
                kind = ViolationKind.NOT_IN_JOINT_FUTURE
            else:
                kind = ViolationKind.JOINT_FUTURE_ESCAPES
            violations.append(Violation(requirement.label, kind, verdict.witness))
            break
    return EmbeddingReport(
        policy=policy,
        checked=tuple(r.label for r in requirements),
        violations=tuple(violations),
    )


def find_compatible_locations(
    a: AffectsSet,
    e: Embedding,
    node: str,
    candidates: Iterable[SpacetimePoint],
    policy: Policy = Policy.CONSERVATIVE,
    *,
    budget: int = DEFAULT_SEARCH_BUDGET,
    allow_colocated: bool = False,
) -> list[SpacetimePoint]:
    """Candidate locations for ``node`` that make the embedding compatible."""

    if node not in e.locations:
        raise EmbeddingError(f"Unknown embedded node '{node}'.")
    found = []
    for candidate in candidates:
        moved = e.moved(node, candidate)
        if not allow_colocated and moved.colocated():
            continue
        report = check_embedding(a, moved, policy, budget=budget, allow_colocated=True)
        if report.compatible:
            found.append(candidate)
    return found
