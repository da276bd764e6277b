"""Exact finite joint distributions over named variables."""

from __future__ import annotations

import itertools
from collections.abc import Collection, Iterable, Iterator, Mapping
from dataclasses import dataclass
from fractions import Fraction

Row = tuple[int, ...]
Assignment = Mapping[str, int]


class DistributionError(RuntimeError):
    """Raised when a distribution is malformed or queried with invalid variables."""


class ZeroProbabilityError(DistributionError):
    """Raised when conditioning on an event of probability zero."""


@dataclass(frozen=True, slots=True)
class Variable:
    name: str
    size: int


def format_fraction(value: Fraction) -> str:
    """Render an exact rational as ``num/den`` (integers keep the ``/1``)."""

    return f"{value.numerator}/{value.denominator}"


def parse_fraction(text: str) -> Fraction:
    """Parse an integer or ``num/den`` literal; floats are rejected."""

    cleaned = text.strip()
    numerator, _, denominator = cleaned.partition("/")
    try:
        if not denominator:
            return Fraction(int(numerator))
        return Fraction(int(numerator), int(denominator))
    except (ValueError, ZeroDivisionError) as exc:
        raise DistributionError(f"Malformed rational '{text}'.") from exc


@dataclass(frozen=True, slots=True)
class JointDistribution:
    """A probability table over full assignments; absent rows have probability 0."""

    variables: tuple[Variable, ...]
    table: Mapping[Row, Fraction]

    def __post_init__(self) -> None:
        names = [variable.name for variable in self.variables]
        if len(set(names)) != len(names):
            raise DistributionError(f"Duplicate variable names in {names}.")
        cleaned: dict[Row, Fraction] = {}
        for row, value in self.table.items():
            if len(row) != len(self.variables):
                raise DistributionError(f"Row {row} does not match variables {names}.")
            for variable, entry in zip(self.variables, row):
                if not 0 <= entry < variable.size:
                    raise DistributionError(
                        f"Value {entry} is outside the alphabet of '{variable.name}'."
                    )
            probability = Fraction(value)
            if probability < 0:
                raise DistributionError(f"Negative probability {value} at {row}.")
            if probability:
                cleaned[tuple(row)] = probability
        total = sum(cleaned.values(), Fraction(0))
        if total != 1:
            raise DistributionError(
                f"Probabilities sum to {format_fraction(total)}, not 1."
            )
        object.__setattr__(self, "table", dict(sorted(cleaned.items())))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(variable.name for variable in self.variables)

    def variable(self, name: str) -> Variable:
        for variable in self.variables:
            if variable.name == name:
                return variable
        raise DistributionError(f"Unknown variable '{name}'.")

    def support(self) -> Iterator[tuple[Row, Fraction]]:
        return iter(self.table.items())

    def assignments(self) -> Iterator[tuple[dict[str, int], Fraction]]:
        for row, probability in self.table.items():
            yield dict(zip(self.names, row)), probability

    def _positions(self, names: Iterable[str]) -> list[int]:
        lookup = {name: i for i, name in enumerate(self.names)}
        positions = []
        for name in names:
            if name not in lookup:
                raise DistributionError(f"Unknown variable '{name}'.")
            positions.append(lookup[name])
        return positions


def all_rows(variables: Iterable[Variable]) -> Iterator[Row]:
    """Every full assignment, in lexicographic order."""

    return itertools.product(*(range(variable.size) for variable in variables))


def uniform(name: str, size: int) -> JointDistribution:
    return JointDistribution(
        variables=(Variable(name, size),),
        table={(value,): Fraction(1, size) for value in range(size)},
    )


def point_mass(variables: Iterable[Variable], row: Row) -> JointDistribution:
    return JointDistribution(variables=tuple(variables), table={tuple(row): Fraction(1)})


def product(p: JointDistribution, q: JointDistribution) -> JointDistribution:
    """The independent product of two distributions over disjoint variables."""

    if set(p.names) & set(q.names):
        raise DistributionError("A product needs disjoint variables.")
    return JointDistribution(
        variables=p.variables + q.variables,
        table={
            left + right: a * b
            for (left, a), (right, b) in itertools.product(p.support(), q.support())
        },
    )


def from_counts(
    variables: Iterable[Variable], counts: Mapping[Row, int]
) -> JointDistribution:
    """The empirical distribution of a histogram."""

    total = sum(counts.values())
    if total <= 0:
        raise DistributionError("An empirical distribution needs at least one sample.")
    return JointDistribution(
        variables=tuple(variables),
        table={row: Fraction(count, total) for row, count in counts.items()},
    )


def probability(p: JointDistribution, event: Assignment) -> Fraction:
    """P(event) for a partial assignment."""

    positions = p._positions(event)
    values = list(event.values())
    return sum(
        (
            mass
            for row, mass in p.support()
            if all(row[i] == v for i, v in zip(positions, values))
        ),
        Fraction(0),
    )


def marginal(p: JointDistribution, keep: Collection[str]) -> JointDistribution:
    """Sum out every variable not in ``keep``; kept variables stay in p's order."""

    if not keep:
        raise DistributionError("A marginal needs at least one variable to keep.")
    p._positions(keep)
    positions = [i for i, name in enumerate(p.names) if name in keep]
    table: dict[Row, Fraction] = {}
    for row, mass in p.support():
        key = tuple(row[i] for i in positions)
        table[key] = table.get(key, Fraction(0)) + mass
    return JointDistribution(
        variables=tuple(p.variables[i] for i in positions), table=table
    )


def reorder(p: JointDistribution, names: Iterable[str]) -> JointDistribution:
    """The same distribution with its variables listed in the order of ``names``."""

    order = list(names)
    if sorted(order) != sorted(p.names):
        raise DistributionError(
            f"Cannot reorder {list(p.names)} as {order}: variable sets differ."
        )
    positions = p._positions(order)
    return JointDistribution(
        variables=tuple(p.variables[i] for i in positions),
        table={tuple(row[i] for i in positions): mass for row, mass in p.support()},
    )


def condition(p: JointDistribution, on: Assignment) -> JointDistribution:
    """The exact conditional distribution of the remaining variables given ``on``."""

    positions = p._positions(on)
    for name, value in on.items():
        variable = p.variable(name)
        if not 0 <= value < variable.size:
            raise DistributionError(
                f"Value {value} is outside the alphabet of '{name}'."
            )
    values = list(on.values())
    matching = {
        row: mass
        for row, mass in p.support()
        if all(row[i] == v for i, v in zip(positions, values))
    }
    weight = sum(matching.values(), Fraction(0))
    if weight == 0:
        rendered = ", ".join(f"{k}={v}" for k, v in on.items())
        raise ZeroProbabilityError(f"Cannot condition on {rendered}: probability 0.")
    remaining = [i for i in range(len(p.variables)) if i not in positions]
    table: dict[Row, Fraction] = {}
    for row, mass in matching.items():
        key = tuple(row[i] for i in remaining)
        table[key] = table.get(key, Fraction(0)) + mass / weight
    return JointDistribution(
        variables=tuple(p.variables[i] for i in remaining), table=table
    )


def _group(p: JointDistribution, names: Collection[str]) -> list[int]:
    return [i for i, name in enumerate(p.names) if name in names]


def is_independent(
    p: JointDistribution,
    x: Collection[str],
    y: Collection[str],
    z: Collection[str] = (),
) -> bool:
    """True iff P(XY|z) = P(X|z)P(Y|z) holds exactly for every z with P(z) > 0."""

    xs, ys, zs = set(x), set(y), set(z)
    if not xs or not ys:
        raise DistributionError("Independence needs nonempty X and Y.")
    if xs & ys or xs & zs or ys & zs:
        raise DistributionError("X, Y and Z must be pairwise disjoint.")
    p._positions(xs | ys | zs)

    x_pos, y_pos, z_pos = _group(p, xs), _group(p, ys), _group(p, zs)
    joint: dict[tuple[Row, Row, Row], Fraction] = {}
    xz: dict[tuple[Row, Row], Fraction] = {}
    yz: dict[tuple[Row, Row], Fraction] = {}
    zz: dict[Row, Fraction] = {}
    for row, mass in p.support():
        kx = tuple(row[i] for i in x_pos)
        ky = tuple(row[i] for i in y_pos)
        kz = tuple(row[i] for i in z_pos)
        joint[kx, ky, kz] = joint.get((kx, ky, kz), Fraction(0)) + mass
        xz[kx, kz] = xz.get((kx, kz), Fraction(0)) + mass
        yz[ky, kz] = yz.get((ky, kz), Fraction(0)) + mass
        zz[kz] = zz.get(kz, Fraction(0)) + mass

    zero = Fraction(0)
    x_rows = list(all_rows(p.variables[i] for i in x_pos))
    y_rows = list(all_rows(p.variables[i] for i in y_pos))
    for kz, pz in zz.items():
        for kx in x_rows:
            pxz = xz.get((kx, kz), zero)
            for ky in y_rows:
                if joint.get((kx, ky, kz), zero) * pz != pxz * yz.get((ky, kz), zero):
                    return False
    return True


def tv_distance(p: JointDistribution, q: JointDistribution) -> Fraction:
    """Half the L1 distance between two tables over the same variables."""

    if p.variables != q.variables:
        raise DistributionError(
            f"Variables differ: {list(p.names)} vs {list(q.names)}."
        )
    rows = set(p.table) | set(q.table)
    zero = Fraction(0)
    return sum(
        (abs(p.table.get(row, zero) - q.table.get(row, zero)) for row in rows), zero
    ) / 2


def format_table(p: JointDistribution) -> list[str]:
    """Serialize ``p``: a ``# names`` header, then one line per support point."""

    lines = ["# " + " ".join(p.names)]
    for row, mass in p.support():
        lines.append(" ".join(str(value) for value in row) + " " + format_fraction(mass))
    return lines


def parse_table(text: str, sizes: Mapping[str, int]) -> JointDistribution:
    """Parse the output of :func:`format_table`; ``sizes`` gives each alphabet."""

    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines or not lines[0].startswith("#"):
        raise DistributionError("A table must start with a '# names' header.")
    names = lines[0].lstrip("#").split()
    try:
        variables = tuple(Variable(name, sizes[name]) for name in names)
    except KeyError as exc:
        raise DistributionError(f"No alphabet size for '{exc.args[0]}'.") from exc
    table: dict[Row, Fraction] = {}
    for line in lines[1:]:
        *values, mass = line.split()
        if len(values) != len(variables):
            raise DistributionError(f"Row '{line}' has the wrong number of values.")
        try:
            row = tuple(int(value) for value in values)
        except ValueError as exc:
            raise DistributionError(f"Row '{line}' has a non-integer value.") from exc
        if row in table:
            raise DistributionError(f"Row '{line}' repeats an assignment.")
        table[row] = parse_fraction(mass)
    return JointDistribution(variables=variables, table=table)
