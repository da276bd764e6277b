"""Plain-text and key=value renderings of every result type.

Renderers are pure: identical inputs give byte-identical lines.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import StrEnum
from fractions import Fraction

from causaloop.certify import CycleCertificate, PathConstraint, Verdict
from causaloop.distribution import JointDistribution, format_fraction, format_table
from causaloop.graph import Path
from causaloop.intervention import AffectsSet
from causaloop.minkowski import EmbeddingReport
from causaloop.scm import SolveReport, Triple
from causaloop.simulation import Comparison, ProtocolRun


class OutputFormat(StrEnum):
    TEXT = "text"
    LINES = "lines"


@dataclass(slots=True)
class Report:
    """A title (styled in text mode) followed by body lines."""

    title: str | None = None
    lines: list[str] = field(default_factory=list)

    def render(self) -> str:
        body = ([self.title] if self.title else []) + self.lines
        return "\n".join(body) + "\n"


def _rows(p: JointDistribution, fmt: OutputFormat, prefix: str = "") -> list[str]:
    if fmt is OutputFormat.TEXT:
        return [prefix + line for line in format_table(p)]
    return [
        prefix
        + "row "
        + " ".join(f"{name}={value}" for name, value in assignment.items())
        + f" p={format_fraction(mass)}"
        for assignment, mass in p.assignments()
    ]


def _setting(setting: dict[str, int]) -> str:
    return ",".join(f"{name}={value}" for name, value in setting.items())


def solve_report(report: SolveReport, fmt: OutputFormat) -> Report:
    lines = _rows(report.distribution, fmt)
    lines += [f"dsep-violation triple={triple}" for triple in report.dsep_violations]
    return Report(title=report.header(), lines=lines)


def dsep_report(triple: Triple, path: Path | None, fmt: OutputFormat) -> Report:
    if fmt is OutputFormat.LINES:
        connecting = str(path).replace(" ", "") if path is not None else "-"
        return Report(lines=[f"query={triple} separated={int(path is None)} path={connecting}"])
    if path is None:
        return Report(lines=["d-separated"])
    return Report(lines=[f"d-connected via {path}"])


def affects_report(a: AffectsSet, fmt: OutputFormat) -> Report:
    prefix = "relation=" if fmt is OutputFormat.LINES else ""
    return Report(
        title=f"model={a.model} max_size={a.max_size}",
        lines=[prefix + str(relation) for relation in a.relations],
    )


def certificate_report(certificate: CycleCertificate, fmt: OutputFormat) -> Report:
    def constraint_text(constraint: PathConstraint) -> str:
        text = str(constraint)
        return text.replace(" ", "") if fmt is OutputFormat.LINES else text

    lines = [
        f"constraint={constraint_text(c)} rule={c.rule} origin={c.origin}"
        for c in certificate.constraints
    ]
    lines += [
        f"refuted order={','.join(step.order)} by={constraint_text(step.violated)}"
        for step in certificate.refutation
    ]
    if certificate.verdict is Verdict.DAG:
        assert certificate.order is not None
        lines.append(f"verdict=dag order={','.join(certificate.order)}")
    else:
        lines.append("verdict=cyclic")
    return Report(lines=lines)


def embedding_report(report: EmbeddingReport, dim: int, fmt: OutputFormat) -> Report:
    lines = [str(violation) for violation in report.violations]
    lines.append("compatible" if report.compatible else "incompatible")
    if fmt is OutputFormat.LINES:
        lines[-1] = f"verdict={lines[-1]}"
    return Report(title=f"policy={report.policy} dim={dim}", lines=lines)


def simulation_report(run: ProtocolRun, fmt: OutputFormat) -> Report:
    lines = []
    for result in run.results:
        setting = _setting(result.setting)
        lines.append(f"do({setting}) tv={format_fraction(result.tv)}")
        rows = sorted(set(result.exact.table) | set(result.empirical.table))
        for row in rows:
            values = " ".join(f"{n}={v}" for n, v in zip(result.exact.names, row))
            exact = format_fraction(result.exact.table.get(row, Fraction(0)))
            empirical = format_fraction(result.empirical.table.get(row, Fraction(0)))
            record = f"{values} exact={exact} empirical={empirical}"
            lines.append(f"setting={setting} {record}" if fmt is OutputFormat.LINES else f"  {record}")
    lines.append(f"xor_fraction={format_fraction(run.xor_fraction)}")
    return Report(
        title=f"model={run.model} experiment={run.experiment} samples={run.samples} seed={run.seed}",
        lines=lines,
    )


def comparison_report(comparison: Comparison, fmt: OutputFormat) -> Report:
    lines = []
    for row in comparison.settings:
        setting = _setting(row.setting)
        lines.append(f"do({setting})")
        for name, outcome in zip(comparison.models, row.outcomes):
            indent = f"setting={setting} model={name} " if fmt is OutputFormat.LINES else f"  {name} "
            lines += _rows(outcome, fmt, prefix=indent)
        for distance in row.distances:
            flag = " distinguishing" if distance.distinguishing else ""
            record = f"{distance.left}~{distance.right} tv={format_fraction(distance.tv)}{flag}"
            lines.append(f"setting={setting} {record}" if fmt is OutputFormat.LINES else f"  {record}")
    verdict = "distinguishable" if comparison.distinguishable else "indistinguishable"
    lines.append(f"verdict={verdict}")
    return Report(
        title=f"experiment={comparison.experiment} models={','.join(comparison.models)}",
        lines=lines,
    )


def finetuning_report(fine_tuned: list[Triple], violations: list[Triple]) -> Report:
    lines = [f"fine-tuned triple={triple}" for triple in fine_tuned]
    lines += [f"dsep-violation triple={triple}" for triple in violations]
    lines.append(f"faithful={int(not fine_tuned)} dsep_property={int(not violations)}")
    return Report(lines=lines)
