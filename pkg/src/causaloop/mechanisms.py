"""Expression language for deterministic causal mechanisms.

Every node is computed from its inputs (graph parents plus an optional
dedicated noise variable) by one expression. Evaluation is carried out modulo
the alphabet size of the node being computed: ``xor`` is addition mod k,
``and``/``or``/``not`` are boolean on zero/nonzero values, and the final
value is reduced mod k.
"""

from __future__ import annotations

import itertools
from collections.abc import Mapping
from dataclasses import dataclass, field


class MechanismError(RuntimeError):
    """Raised when a mechanism cannot be evaluated or is malformed."""


class Expression:
    """Base class of the mechanism expression tree."""

    def evaluate(self, values: Mapping[str, int], modulus: int) -> int:
        raise NotImplementedError

    def names(self) -> frozenset[str]:
        raise NotImplementedError

    def rename(self, old: str, new: str) -> Expression:
        raise NotImplementedError


@dataclass(frozen=True, slots=True)
class Const(Expression):
    value: int

    def evaluate(self, values: Mapping[str, int], modulus: int) -> int:
        return self.value % modulus

    def names(self) -> frozenset[str]:
        return frozenset()

    def rename(self, old: str, new: str) -> Expression:
        return self

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True, slots=True)
class Ref(Expression):
    name: str

    def evaluate(self, values: Mapping[str, int], modulus: int) -> int:
        try:
            return values[self.name] % modulus
        except KeyError as exc:
            raise MechanismError(f"No value available for '{self.name}'.") from exc

    def names(self) -> frozenset[str]:
        return frozenset({self.name})

    def rename(self, old: str, new: str) -> Expression:
        return Ref(new) if self.name == old else self

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class _Variadic(Expression):
    args: tuple[Expression, ...]

    keyword = ""

    def __post_init__(self) -> None:
        if not self.args:
            raise MechanismError(f"{self.keyword}() needs at least one argument.")

    def names(self) -> frozenset[str]:
        return frozenset().union(*(arg.names() for arg in self.args))

    def rename(self, old: str, new: str) -> Expression:
        return type(self)(tuple(arg.rename(old, new) for arg in self.args))

    def __str__(self) -> str:
        return f"{self.keyword}({', '.join(str(arg) for arg in self.args)})"


@dataclass(frozen=True, slots=True)
class Xor(_Variadic):
    keyword = "xor"

    def evaluate(self, values: Mapping[str, int], modulus: int) -> int:
        return sum(arg.evaluate(values, modulus) for arg in self.args) % modulus


@dataclass(frozen=True, slots=True)
class And(_Variadic):
    keyword = "and"

    def evaluate(self, values: Mapping[str, int], modulus: int) -> int:
        return int(all(arg.evaluate(values, modulus) for arg in self.args))


@dataclass(frozen=True, slots=True)
class Or(_Variadic):
    keyword = "or"

    def evaluate(self, values: Mapping[str, int], modulus: int) -> int:
        return int(any(arg.evaluate(values, modulus) for arg in self.args))


@dataclass(frozen=True, slots=True)
class Not(Expression):
    arg: Expression

    def evaluate(self, values: Mapping[str, int], modulus: int) -> int:
        return int(self.arg.evaluate(values, modulus) == 0)

    def names(self) -> frozenset[str]:
        return self.arg.names()

    def rename(self, old: str, new: str) -> Expression:
        return Not(self.arg.rename(old, new))

    def __str__(self) -> str:
        return f"not({self.arg})"


@dataclass(frozen=True, slots=True)
class Table(Expression):
    """An explicit lookup table keyed by the values of ``args`` (in that order)."""

    args: tuple[str, ...]
    rows: tuple[tuple[tuple[int, ...], int], ...]
    _lookup: dict[tuple[int, ...], int] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        if len(set(self.args)) != len(self.args):
            raise MechanismError(f"Table arguments repeat a name: {self.args}.")
        lookup: dict[tuple[int, ...], int] = {}
        for key, value in self.rows:
            if len(key) != len(self.args):
                raise MechanismError(
                    f"Table key {key} does not match arguments {self.args}."
                )
            if key in lookup:
                raise MechanismError(f"Table key {key} appears twice.")
            lookup[key] = value
        object.__setattr__(self, "_lookup", lookup)

    def check_total(self, sizes: Mapping[str, int]) -> None:
        """Raise unless every assignment of the arguments has a row."""

        for key in itertools.product(*(range(sizes[arg]) for arg in self.args)):
            if key not in self._lookup:
                rendered = " ".join(f"{a}={v}" for a, v in zip(self.args, key))
                raise MechanismError(f"Table has no row for {rendered}.")

    def evaluate(self, values: Mapping[str, int], modulus: int) -> int:
        try:
            key = tuple(values[arg] for arg in self.args)
        except KeyError as exc:
            raise MechanismError(f"No value available for '{exc.args[0]}'.") from exc
        try:
            return self._lookup[key] % modulus
        except KeyError as exc:
            raise MechanismError(f"Table has no row for {key}.") from exc

    def names(self) -> frozenset[str]:
        return frozenset(self.args)

    def rename(self, old: str, new: str) -> Expression:
        return Table(
            args=tuple(new if arg == old else arg for arg in self.args), rows=self.rows
        )

    def reordered(self, order: tuple[str, ...]) -> Table:
        """The same table with its arguments permuted into ``order``."""

        positions = [self.args.index(arg) for arg in order]
        return Table(
            args=order,
            rows=tuple(
                sorted(
                    (tuple(key[i] for i in positions), value)
                    for key, value in self.rows
                )
            ),
        )

    def __str__(self) -> str:
        entries = []
        for key, value in self.rows:
            assignment = " ".join(f"{arg}={v}" for arg, v in zip(self.args, key))
            entries.append(f"{assignment}: {value}")
        return "table{" + ", ".join(entries) + "}"


@dataclass(frozen=True, slots=True)
class FreeInput(Expression):
    """Placeholder for an intervened node whose value has not been fixed."""

    def evaluate(self, values: Mapping[str, int], modulus: int) -> int:
        raise MechanismError("A free input has no value; fix the intervention first.")

    def names(self) -> frozenset[str]:
        return frozenset()

    def rename(self, old: str, new: str) -> Expression:
        return self

    def __str__(self) -> str:
        return "free"


@dataclass(frozen=True, slots=True)
class Mechanism:
    """How ``node`` is computed; ``noise_parent`` names its dedicated exogenous input."""

    node: str
    expression: Expression
    noise_parent: str | None = None

    @property
    def inputs(self) -> frozenset[str]:
        return self.expression.names()

    @property
    def is_free(self) -> bool:
        return isinstance(self.expression, FreeInput)

    def rename(self, old: str, new: str) -> Mechanism:
        return Mechanism(
            node=self.node,
            expression=self.expression.rename(old, new),
            noise_parent=self.noise_parent,
        )

    def __str__(self) -> str:
        return f"{self.node} = {self.expression}"
