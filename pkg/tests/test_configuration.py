"""Tests for configuration helpers and CLI integration."""

from pathlib import Path

import pytest
from typer.testing import CliRunner

from causaloop import configuration
from causaloop.configuration import Settings
from causaloop.main import app
from causaloop.minkowski import Policy
from causaloop.reports import OutputFormat

runner = CliRunner()


def test_delete_settings_returns_false_when_missing(isolated_config: Path) -> None:
    assert configuration.delete_settings() is False
    assert not isolated_config.exists()


def test_delete_settings_removes_existing_file(isolated_config: Path) -> None:
    isolated_config.parent.mkdir(parents=True)
    isolated_config.write_text("[causaloop]\nmax_size = 3\n")

    assert configuration.delete_settings() is True
    assert not isolated_config.exists()


def test_save_and_load_round_trip(isolated_config: Path) -> None:
    settings = Settings(max_size=3, policy=Policy.REDUCED, output=OutputFormat.LINES)

    saved_path = configuration.save_settings(settings)

    assert saved_path == isolated_config
    assert "[causaloop]" in isolated_config.read_text()
    assert 'policy = "reduced"' in isolated_config.read_text()
    loaded = configuration.load_settings()
    assert loaded == settings
    assert loaded is not None and loaded.policy is Policy.REDUCED


def test_load_settings_returns_none_when_missing(isolated_config: Path) -> None:
    assert configuration.load_settings() is None
    assert configuration.config_path() == isolated_config


def test_load_settings_raises_for_invalid_payload(isolated_config: Path) -> None:
    isolated_config.parent.mkdir(parents=True)
    isolated_config.write_text("invalid = true\n")

    with pytest.raises(configuration.ConfigError, match=r"missing the \[causaloop\] section"):
        configuration.load_settings()


def test_load_settings_rejects_unknown_fields(isolated_config: Path) -> None:
    isolated_config.parent.mkdir(parents=True)
    isolated_config.write_text("[causaloop]\nmax_size = 2\ncolour = \"blue\"\n")

    with pytest.raises(configuration.ConfigError, match=r"causaloop\.colour"):
        configuration.load_settings()


@pytest.mark.parametrize(
    "body, message",
    [
        ("max_size = 0", r"causaloop\.max_size must be a positive integer"),
        ("samples = true", r"causaloop\.samples must be a positive integer"),
        ('policy = "lenient"', "Invalid configuration value"),
        ('output = "json"', "Invalid configuration value"),
    ],
)
def test_load_settings_rejects_bad_values(isolated_config: Path, body: str, message: str) -> None:
    isolated_config.parent.mkdir(parents=True)
    isolated_config.write_text(f"[causaloop]\n{body}\n")

    with pytest.raises(configuration.ConfigError, match=message):
        configuration.load_settings()


def test_broken_toml_is_reported(isolated_config: Path) -> None:
    isolated_config.parent.mkdir(parents=True)
    isolated_config.write_text("[causaloop\n")

    with pytest.raises(configuration.ConfigError, match="Failed to parse"):
        configuration.load_settings()


def test_explicit_options_win_over_stored_settings(isolated_config: Path) -> None:
    configuration.save_settings(Settings(max_size=3, samples=500))

    stored = configuration.resolve_run_config("affects", models=[Path("loop")])
    explicit = configuration.resolve_run_config("affects", models=[Path("loop")], max_size=1)

    assert stored.settings.max_size == 3
    assert stored.settings.samples == 500
    assert explicit.settings.max_size == 1
    assert explicit.settings.samples == 500
    assert explicit.model == Path("loop")


def test_defaults_apply_without_a_config_file(isolated_config: Path) -> None:
    resolved = configuration.resolve_run_config("compare")

    assert resolved.settings == Settings()
    with pytest.raises(configuration.ConfigError, match="needs a model file"):
        _ = resolved.model


def test_cli_config_saves_settings(isolated_config: Path) -> None:
    result = runner.invoke(
        app,
        ["config", "--max-size", "3", "--policy", "reduced", "--show-path"],
    )

    assert result.exit_code == 0
    assert "causaloop configuration saved." in result.stdout
    assert f"Location: {isolated_config}" in result.stdout
    loaded = configuration.load_settings()
    assert loaded == Settings(max_size=3, policy=Policy.REDUCED)


def test_cli_config_merges_with_stored_settings(isolated_config: Path) -> None:
    configuration.save_settings(Settings(samples=500))

    result = runner.invoke(app, ["config", "--format", "lines"])

    assert result.exit_code == 0
    assert configuration.load_settings() == Settings(samples=500, output=OutputFormat.LINES)


def test_cli_config_clear_removes_file(isolated_config: Path) -> None:
    configuration.save_settings(Settings())

    result = runner.invoke(app, ["config", "--clear", "--show-path"])

    assert result.exit_code == 0
    assert "causaloop configuration deleted." in result.stdout
    assert f"Location: {isolated_config}" in result.stdout
    assert not isolated_config.exists()


def test_cli_config_clear_reports_missing_file(isolated_config: Path) -> None:
    result = runner.invoke(app, ["config", "--clear"])

    assert result.exit_code == 0
    assert "No causaloop configuration found to delete." in result.stdout


def test_cli_config_clear_errors_with_additional_options(isolated_config: Path) -> None:
    result = runner.invoke(app, ["config", "--clear", "--max-size", "3"])

    assert result.exit_code == 2
    assert "Cannot combine setting options with --clear." in (result.stderr or "")
