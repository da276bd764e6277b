"""causaloop CLI entry point implemented with Typer."""

from __future__ import annotations

import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import typer

from causaloop.certify import CertifierError, Verdict, certify_cycle
from causaloop.configuration import (
    ConfigError,
    RunConfig,
    Settings,
    config_path,
    delete_settings,
    load_settings,
    resolve_run_config,
    save_settings,
)
from causaloop.distribution import DistributionError, marginal
from causaloop.graph import GraphError, d_connecting_path
from causaloop.intervention import InterventionError, enumerate_affects
from causaloop.minkowski import EmbeddingError, Policy, check_embedding
from causaloop.modelfile import (
    FIXTURES,
    ModelFileError,
    ParsedModel,
    load_fixture,
    load_model,
    serialize_model,
)
from causaloop.reports import (
    OutputFormat,
    Report,
    affects_report,
    certificate_report,
    comparison_report,
    dsep_report,
    embedding_report,
    finetuning_report,
    simulation_report,
    solve_report,
)
from causaloop.scm import (
    ModelError,
    SolveError,
    Triple,
    check_dsep_property,
    detect_fine_tuning,
    solve,
)
from causaloop.simulation import Experiment, compare_models, simulate_protocol

from . import __version__

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_INPUT = 2

_INPUT_ERRORS = (
    CertifierError,
    ConfigError,
    DistributionError,
    EmbeddingError,
    GraphError,
    InterventionError,
    ModelError,
    ModelFileError,
    SolveError,
)

_EXPECTATIONS = {
    "certify": {"cyclic": Verdict.CYCLIC, "dag": Verdict.DAG},
    "embed-check": {"compatible": True, "incompatible": False},
}

app = typer.Typer(
    help="Exact solving, intervention analysis and loop certification for finite causal models."
)


@dataclass(slots=True)
class RunOutcome:
    status: int
    report: Report | None = None
    error: str | None = None


def _load(path: Path) -> ParsedModel:
    """Load a model file, or a shipped fixture when given its bare name."""

    if not path.exists() and str(path) in FIXTURES:
        return load_fixture(str(path))
    return load_model(path)


def _parse_query(query: str | None) -> Triple:
    if query is None:
        raise ConfigError("dsep needs a query of the form X|Y|Z, e.g. 'B|A|C'.")
    parts = query.split("|")
    if len(parts) == 2:
        parts.append("")
    if len(parts) != 3:
        raise ConfigError(f"Malformed query '{query}'; expected X|Y|Z.")

    def group(text: str) -> tuple[str, ...]:
        return tuple(name.strip() for name in text.split(",") if name.strip())

    x, y, z = (group(part) for part in parts)
    return Triple(x=x, y=y, z=z)


def _polarity(config: RunConfig, outcome: bool | Verdict, negative: bool | Verdict) -> int:
    """Exit status for a verdict: 1 for the negative one unless --expect names it."""

    if config.expect is None:
        return EXIT_NEGATIVE if outcome == negative else EXIT_OK
    expectations = _EXPECTATIONS.get(config.command, {})
    if config.expect not in expectations:
        raise ConfigError(
            f"--expect {config.expect} does not apply to '{config.command}'"
            + (f"; choose from {', '.join(expectations)}." if expectations else ".")
        )
    return EXIT_OK if outcome == expectations[config.expect] else EXIT_NEGATIVE


def _dispatch(config: RunConfig) -> RunOutcome:
    settings = config.settings
    fmt = settings.output

    if config.command == "compare":
        if config.experiment is None:
            raise ConfigError("compare needs --experiment E1 or E2.")
        models = [_load(path).model for path in config.models]
        comparison = compare_models(models, Experiment(config.experiment))
        return RunOutcome(EXIT_OK, comparison_report(comparison, fmt))

    parsed = _load(config.model)
    model = parsed.model

    match config.command:
        case "solve":
            report = solve(model, audit=True)
            status = EXIT_NEGATIVE if report.dsep_violations else EXIT_OK
            return RunOutcome(status, solve_report(report, fmt))
        case "dsep":
            triple = _parse_query(config.query)
            path = d_connecting_path(model.graph, triple.x, triple.y, triple.z)
            return RunOutcome(EXIT_OK, dsep_report(triple, path, fmt))
        case "affects":
            return RunOutcome(EXIT_OK, affects_report(enumerate_affects(model, settings.max_size), fmt))
        case "certify":
            solve(model, audit=True)
            certificate = certify_cycle(enumerate_affects(model, settings.max_size), settings.order_cap)
            status = _polarity(config, certificate.verdict, Verdict.CYCLIC)
            return RunOutcome(status, certificate_report(certificate, fmt))
        case "embed-check":
            if parsed.embedding is None:
                raise ModelFileError(f"Model '{model.name}' has no [embedding] section.")
            report = check_embedding(
                enumerate_affects(model, settings.max_size),
                parsed.embedding,
                settings.policy,
                budget=settings.search_budget,
                allow_colocated=config.allow_colocated,
            )
            status = _polarity(config, report.compatible, False)
            return RunOutcome(status, embedding_report(report, parsed.embedding.dim, fmt))
        case "simulate":
            if config.experiment is None or config.seed is None:
                raise ConfigError("simulate needs --experiment and --seed.")
            protocol = simulate_protocol(
                model, Experiment(config.experiment), settings.samples, config.seed
            )
            return RunOutcome(EXIT_OK, simulation_report(protocol, fmt))
        case "finetuning":
            observed = marginal(solve(model).distribution, model.observed)
            violations = check_dsep_property(model.graph, observed)
            fine_tuned = detect_fine_tuning(model.graph, observed)
            status = EXIT_NEGATIVE if violations else EXIT_OK
            return RunOutcome(status, finetuning_report(fine_tuned, violations))
        case "show":
            return RunOutcome(EXIT_OK, Report(lines=serialize_model(parsed).splitlines()))
    raise ConfigError(f"Unknown command '{config.command}'.")


def run(config: RunConfig) -> RunOutcome:
    """Execute one command; input and model errors become exit status 2."""

    try:
        return _dispatch(config)
    except _INPUT_ERRORS as exc:
        return RunOutcome(EXIT_INPUT, error=str(exc))


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def _execute(command: str, **options: object) -> None:
    verbose = bool(options.get("verbose"))
    _configure_logging(verbose)
    try:
        config = resolve_run_config(command, **options)
    except ConfigError as exc:
        typer.secho(str(exc), err=True, fg=typer.colors.RED)
        raise typer.Exit(code=EXIT_INPUT) from exc

    outcome = run(config)
    if outcome.error is not None:
        typer.secho(outcome.error, err=True, fg=typer.colors.RED)
    if outcome.report is not None:
        if outcome.report.title:
            if config.settings.output is OutputFormat.TEXT:
                typer.secho(outcome.report.title, bold=True)
            else:
                typer.echo(outcome.report.title)
        for line in outcome.report.lines:
            typer.echo(line)
    raise typer.Exit(code=outcome.status)


_MODEL = typer.Argument(..., help="Model file, or a shipped fixture name (otp, jam, loop).")


def _format_option() -> Any:
    return typer.Option(None, "--format", "-f", help="Report format: text or lines.")


def _verbose_option() -> Any:
    return typer.Option(False, "--verbose", "-v", help="Log solver progress to stderr.")


def _max_size_option() -> Any:
    return typer.Option(None, "--max-size", min=1, help="Largest set size in affects relations.")


@app.command("solve")
def solve_command(
    model: Path = _MODEL,
    output: OutputFormat | None = _format_option(),
    verbose: bool = _verbose_option(),
) -> None:
    """Solve a model for its exact distribution and audit the d-separation property."""

    _execute("solve", models=[model], output=output, verbose=verbose)


@app.command("dsep")
def dsep_command(
    model: Path = _MODEL,
    query: str = typer.Argument(..., help="Query X|Y|Z with comma-separated node names."),
    output: OutputFormat | None = _format_option(),
    verbose: bool = _verbose_option(),
) -> None:
    """Test whether X and Y are d-separated given Z."""

    _execute("dsep", models=[model], query=query, output=output, verbose=verbose)


@app.command("affects")
def affects_command(
    model: Path = _MODEL,
    max_size: int | None = _max_size_option(),
    output: OutputFormat | None = _format_option(),
    verbose: bool = _verbose_option(),
) -> None:
    """Enumerate first-order and higher-order affects relations."""

    _execute("affects", models=[model], max_size=max_size, output=output, verbose=verbose)


@app.command("certify")
def certify_command(
    model: Path = _MODEL,
    max_size: int | None = _max_size_option(),
    order_cap: int | None = typer.Option(
        None, "--order-cap", min=1, help="Most nodes the exhaustive order search accepts."
    ),
    expect: str | None = typer.Option(
        None, "--expect", help="Verdict that counts as success: cyclic or dag."
    ),
    output: OutputFormat | None = _format_option(),
    verbose: bool = _verbose_option(),
) -> None:
    """Certify from intervention statistics alone that no acyclic model explains them."""

    _execute(
        "certify",
        models=[model],
        max_size=max_size,
        order_cap=order_cap,
        expect=expect,
        output=output,
        verbose=verbose,
    )


@app.command("embed-check")
def embed_check_command(
    model: Path = _MODEL,
    max_size: int | None = _max_size_option(),
    policy: Policy | None = typer.Option(
        None, "--policy", help="Which affects relations constrain the embedding."
    ),
    search_budget: int | None = typer.Option(
        None, "--search-budget", min=1, help="Directions tried per anchor when d >= 2."
    ),
    allow_colocated: bool = typer.Option(
        False, "--allow-colocated", help="Permit nodes sharing one space-time location."
    ),
    expect: str | None = typer.Option(
        None, "--expect", help="Verdict that counts as success: compatible or incompatible."
    ),
    output: OutputFormat | None = _format_option(),
    verbose: bool = _verbose_option(),
) -> None:
    """Check the model's embedding for signalling outside the space-time future."""

    _execute(
        "embed-check",
        models=[model],
        max_size=max_size,
        policy=policy,
        search_budget=search_budget,
        allow_colocated=allow_colocated,
        expect=expect,
        output=output,
        verbose=verbose,
    )


@app.command("simulate")
def simulate_command(
    model: Path = _MODEL,
    experiment: Experiment = typer.Option(..., "--experiment", help="E1 or E2."),
    seed: int = typer.Option(..., "--seed", min=0, help="Seed of the sampling streams."),
    samples: int | None = typer.Option(None, "--samples", min=1, help="Samples per setting."),
    output: OutputFormat | None = _format_option(),
    verbose: bool = _verbose_option(),
) -> None:
    """Sample an intervention protocol and compare it with the exact outcomes."""

    _execute(
        "simulate",
        models=[model],
        experiment=experiment,
        seed=seed,
        samples=samples,
        output=output,
        verbose=verbose,
    )


@app.command("finetuning")
def finetuning_command(
    model: Path = _MODEL,
    output: OutputFormat | None = _format_option(),
    verbose: bool = _verbose_option(),
) -> None:
    """List d-connected yet independent triples and d-separation property failures."""

    _execute("finetuning", models=[model], output=output, verbose=verbose)


@app.command("compare")
def compare_command(
    models: list[Path] = typer.Argument(..., help="Two or more model files or fixture names."),
    experiment: Experiment = typer.Option(..., "--experiment", help="E1 or E2."),
    output: OutputFormat | None = _format_option(),
    verbose: bool = _verbose_option(),
) -> None:
    """Compare exact protocol outcomes of several models side by side."""

    _execute("compare", models=models, experiment=experiment, output=output, verbose=verbose)


@app.command("show")
def show_command(
    model: Path = _MODEL,
    verbose: bool = _verbose_option(),
) -> None:
    """Print the canonical form of a model file."""

    _execute("show", models=[model], verbose=verbose)


@app.command()
def version() -> None:
    """Print the version"""
    typer.echo(__version__)
    raise typer.Exit()


@app.command()
def config(
    max_size: int | None = _max_size_option(),
    policy: Policy | None = typer.Option(None, "--policy", help="Default embedding policy."),
    samples: int | None = typer.Option(None, "--samples", min=1, help="Default samples per setting."),
    output: OutputFormat | None = _format_option(),
    search_budget: int | None = typer.Option(
        None, "--search-budget", min=1, help="Default directions per anchor when d >= 2."
    ),
    order_cap: int | None = typer.Option(
        None, "--order-cap", min=1, help="Default cap of the exhaustive order search."
    ),
    show_path: bool = typer.Option(
        False, "--show-path", help="Print the configuration file location."
    ),
    clear: bool = typer.Option(
        False,
        "--clear",
        help="Delete the stored defaults instead of updating them.",
    ),
) -> None:
    """Save or clear the defaults used by every command."""

    updates = {
        "max_size": max_size,
        "policy": policy,
        "samples": samples,
        "output": output,
        "search_budget": search_budget,
        "order_cap": order_cap,
    }
    updates = {key: value for key, value in updates.items() if value is not None}

    if clear:
        if updates:
            typer.secho(
                "Cannot combine setting options with --clear.",
                err=True,
                fg=typer.colors.RED,
            )
            raise typer.Exit(code=EXIT_INPUT)

        try:
            removed = delete_settings()
        except ConfigError as exc:  # pragma: no cover - defensive guard
            typer.secho(str(exc), err=True, fg=typer.colors.RED)
            raise typer.Exit(code=EXIT_INPUT) from exc

        if removed:
            typer.secho("causaloop configuration deleted.", fg=typer.colors.GREEN)
        else:
            typer.secho(
                "No causaloop configuration found to delete.",
                fg=typer.colors.YELLOW,
            )

        if show_path:
            typer.echo(f"Location: {config_path()}")

        return

    try:
        merged = replace(load_settings() or Settings(), **updates)
    except ConfigError as exc:
        typer.secho(str(exc), err=True, fg=typer.colors.RED)
        raise typer.Exit(code=EXIT_INPUT) from exc

    saved_path = save_settings(merged)

    typer.secho("causaloop configuration saved.", fg=typer.colors.GREEN)
    if show_path:
        typer.echo(f"Location: {saved_path}")
