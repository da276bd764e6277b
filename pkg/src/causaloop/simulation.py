"""Seeded sampling of the two three-party intervention protocols.

In E1 the parties holding A and C intervene on every (a, c) and B is
recorded; in E2 B is intervened on and (A, C) recorded. Each setting is
sampled from its exact post-intervention distribution with a Philox stream
keyed on (seed, setting index); samples are drawn in fixed-size blocks and
block ``i`` uses counter ``i``, so any partition of the blocks reproduces the
same histogram.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from enum import StrEnum
from fractions import Fraction

import numpy as np

from causaloop.distribution import (
    JointDistribution,
    Row,
    Variable,
    all_rows,
    from_counts,
    marginal,
    reorder,
    tv_distance,
)
from causaloop.intervention import (
    InterventionError,
    InterventionTarget,
    post_intervention_distribution,
)
from causaloop.scm import CausalModel

logger = logging.getLogger(__name__)

BLOCK_SIZE = 4096
DISTINGUISHING_TV = Fraction(1, 4)


class Experiment(StrEnum):
    E1 = "E1"
    E2 = "E2"

    @property
    def intervened(self) -> tuple[str, ...]:
        return ("A", "C") if self is Experiment.E1 else ("B",)

    @property
    def recorded(self) -> tuple[str, ...]:
        return ("B",) if self is Experiment.E1 else ("A", "C")


def _require_parties(m: CausalModel) -> None:
    missing = [name for name in ("A", "B", "C") if name not in m.observed]
    if missing:
        raise InterventionError(
            f"Model '{m.name}' lacks observed nodes {missing}; the protocols need A, B and C."
        )


def settings_for(m: CausalModel, experiment: Experiment) -> list[dict[str, int]]:
    """Every intervention setting of the experiment, in lexicographic order."""

    _require_parties(m)
    variables = [
        Variable(name, m.graph.node(name).alphabet_size) for name in experiment.intervened
    ]
    return [dict(zip(experiment.intervened, row)) for row in all_rows(variables)]


def exact_outcome(
    m: CausalModel, experiment: Experiment, setting: dict[str, int]
) -> JointDistribution:
    """The exact distribution of the recorded nodes under the setting."""

    post = post_intervention_distribution(m, InterventionTarget.fixed(setting))
    return reorder(marginal(post, experiment.recorded), experiment.recorded)


def sample_counts(
    p: JointDistribution, samples: int, seed: int, stream: int
) -> dict[Row, int]:
    """Draw ``samples`` rows of ``p`` from the Philox stream (seed, stream)."""

    if samples < 1:
        raise InterventionError("At least one sample is required.")
    if not 0 <= seed < 2**64 or not 0 <= stream < 2**64:
        raise InterventionError("Seeds must lie in [0, 2**64).")
    rows, masses = zip(*p.support())
    cdf = np.cumsum(np.array([float(mass) for mass in masses]))
    counts = np.zeros(len(rows), dtype=np.int64)
    for block, start in enumerate(range(0, samples, BLOCK_SIZE)):
        size = min(BLOCK_SIZE, samples - start)
        generator = np.random.Generator(
            np.random.Philox(key=(seed << 64) | stream, counter=block << 128)
        )
        draws = generator.random(size)
        indices = np.minimum(np.searchsorted(cdf, draws, side="right"), len(rows) - 1)
        counts += np.bincount(indices, minlength=len(rows))
    return {row: int(count) for row, count in zip(rows, counts) if count}


@dataclass(frozen=True, slots=True)
class SettingResult:
    setting: dict[str, int]
    exact: JointDistribution
    empirical: JointDistribution
    tv: Fraction
    xor_fraction: Fraction


@dataclass(frozen=True, slots=True)
class ProtocolRun:
    model: str
    experiment: Experiment
    samples: int
    seed: int
    results: tuple[SettingResult, ...]

    @property
    def xor_fraction(self) -> Fraction:
        """Share of all samples, across settings, with B = A xor C."""

        return sum((r.xor_fraction for r in self.results), Fraction(0)) / len(self.results)


def _xor_fraction(
    m: CausalModel,
    experiment: Experiment,
    setting: dict[str, int],
    counts: dict[Row, int],
) -> Fraction:
    size = m.graph.node("B").alphabet_size
    hits = 0
    for row, count in counts.items():
        values = {**setting, **dict(zip(experiment.recorded, row))}
        if values["B"] == (values["A"] + values["C"]) % size:
            hits += count
    return Fraction(hits, sum(counts.values()))


def simulate_protocol(
    m: CausalModel, experiment: Experiment, samples: int, seed: int
) -> ProtocolRun:
    """Sample every setting of ``experiment`` and compare with the exact outcome."""

    results = []
    for index, setting in enumerate(settings_for(m, experiment)):
        exact = exact_outcome(m, experiment, setting)
        counts = sample_counts(exact, samples, seed, index)
        empirical = from_counts(exact.variables, counts)
        results.append(
            SettingResult(
                setting=setting,
                exact=exact,
                empirical=empirical,
                tv=tv_distance(empirical, exact),
                xor_fraction=_xor_fraction(m, experiment, setting, counts),
            )
        )
    logger.debug(
        "Simulated %s on '%s': %d settings x %d samples", experiment, m.name, len(results), samples
    )
    return ProtocolRun(
        model=m.name, experiment=experiment, samples=samples, seed=seed, results=tuple(results)
    )


@dataclass(frozen=True, slots=True)
class PairDistance:
    left: str
    right: str
    tv: Fraction

    @property
    def distinguishing(self) -> bool:
        return self.tv >= DISTINGUISHING_TV


@dataclass(frozen=True, slots=True)
class SettingComparison:
    setting: dict[str, int]
    outcomes: tuple[JointDistribution, ...]
    distances: tuple[PairDistance, ...]

    @property
    def flagged(self) -> bool:
        return any(d.distinguishing for d in self.distances)


@dataclass(frozen=True, slots=True)
class Comparison:
    models: tuple[str, ...]
    experiment: Experiment
    settings: tuple[SettingComparison, ...]

    @property
    def distinguishable(self) -> bool:
        return any(s.flagged for s in self.settings)


def _signature(m: CausalModel) -> tuple[tuple[str, int], ...]:
    return tuple(sorted((name, m.graph.node(name).alphabet_size) for name in m.observed))


def compare_models(models: Sequence[CausalModel], experiment: Experiment) -> Comparison:
    """Exact outcomes of every setting side by side, with pairwise TV distances."""

    if len(models) < 2:
        raise InterventionError("Comparing needs at least two models.")
    signature = _signature(models[0])
    for m in models[1:]:
        if _signature(m) != signature:
            raise InterventionError(
                f"Models '{models[0].name}' and '{m.name}' observe different nodes or alphabets."
            )

    rows = []
    for setting in settings_for(models[0], experiment):
        outcomes = tuple(exact_outcome(m, experiment, setting) for m in models)
        distances = tuple(
            PairDistance(
                left=models[i].name,
                right=models[j].name,
                tv=tv_distance(outcomes[i], outcomes[j]),
            )
            for i, j in itertools.combinations(range(len(models)), 2)
        )
        rows.append(SettingComparison(setting=setting, outcomes=outcomes, distances=distances))
    return Comparison(
        models=tuple(m.name for m in models), experiment=experiment, settings=tuple(rows)
    )
