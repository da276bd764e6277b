"""Helpers for managing causaloop CLI defaults."""

import tomllib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import tomli_w
from platformdirs import user_config_dir

from causaloop.certify import DEFAULT_ORDER_CAP
from causaloop.minkowski import DEFAULT_SEARCH_BUDGET, Policy
from causaloop.reports import OutputFormat


class ConfigError(RuntimeError):
    """Raised when the persisted configuration is invalid."""


@dataclass(slots=True)
class Settings:
    """Defaults applied to every command unless overridden on the command line."""

    max_size: int = 2
    policy: Policy = Policy.CONSERVATIVE
    samples: int = 100_000
    output: OutputFormat = OutputFormat.TEXT
    search_budget: int = DEFAULT_SEARCH_BUDGET
    order_cap: int = DEFAULT_ORDER_CAP

    def __post_init__(self) -> None:
        for name in ("max_size", "samples", "search_budget", "order_cap"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError(f"causaloop.{name} must be a positive integer, got {value!r}.")
        try:
            self.policy = Policy(self.policy)
            self.output = OutputFormat(self.output)
        except ValueError as exc:
            raise ConfigError(f"Invalid configuration value: {exc}") from exc


@dataclass(slots=True)
class RunConfig:
    """Everything one command invocation needs."""

    command: str
    models: list[Path] = field(default_factory=list)
    query: str | None = None
    experiment: str | None = None
    seed: int | None = None
    expect: str | None = None
    allow_colocated: bool = False
    verbose: bool = False
    settings: Settings = field(default_factory=Settings)

    @property
    def model(self) -> Path:
        if not self.models:
            raise ConfigError(f"'{self.command}' needs a model file.")
        return self.models[0]


_CONFIG_DIR = Path(user_config_dir("causaloop", "causaloop"))
_CONFIG_FILE = _CONFIG_DIR / "config.toml"


def config_path() -> Path:
    """Return the path where the CLI configuration is stored."""

    return _CONFIG_FILE


def load_settings() -> Settings | None:
    """Load the saved settings, if present."""

    if not _CONFIG_FILE.exists():
        return None

    try:
        payload = tomllib.loads(_CONFIG_FILE.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"Failed to parse configuration file: {exc}") from exc

    section = payload.get("causaloop")
    if not isinstance(section, dict):
        raise ConfigError("Configuration file is missing the [causaloop] section.")

    known = {f.name for f in fields(Settings)}
    unknown = sorted(set(section) - known)
    if unknown:
        raise ConfigError(
            f"Configuration file has unknown field(s): {', '.join('causaloop.' + u for u in unknown)}"
        )
    return Settings(**section)


def save_settings(settings: Settings) -> Path:
    """Persist the given settings to disk."""

    _CONFIG_DIR.mkdir(parents=True, exist_ok=True)
    section = {
        key: str(value) if isinstance(value, str) else value
        for key, value in asdict(settings).items()
    }
    _CONFIG_FILE.write_text(tomli_w.dumps({"causaloop": section}))
    return _CONFIG_FILE


def delete_settings() -> bool:
    """Delete the persisted settings if they exist."""

    if not _CONFIG_FILE.exists():
        return False

    try:
        _CONFIG_FILE.unlink()
    except OSError as exc:  # pragma: no cover - defensive guard
        raise ConfigError(f"Failed to delete configuration file: {exc}") from exc

    return True


def resolve_run_config(command: str, **overrides: Any) -> RunConfig:
    """Build a RunConfig: explicit options win over stored settings, which win over defaults."""

    stored = load_settings() or Settings()
    chosen: dict[str, Any] = {}
    for setting in fields(Settings):
        value = overrides.pop(setting.name, None)
        chosen[setting.name] = getattr(stored, setting.name) if value is None else value
    return RunConfig(command=command, settings=Settings(**chosen), **overrides)
