"""Shared fixtures: the three shipped models, their affects sets and an isolated config."""

from collections.abc import Callable
from pathlib import Path

import pytest

from causaloop import configuration
from causaloop.graph import Graph, Node, NodeKind
from causaloop.intervention import AffectsSet, enumerate_affects
from causaloop.modelfile import ParsedModel, load_fixture
from causaloop.scm import CausalModel


@pytest.fixture(scope="session")
def parsed_fixtures() -> dict[str, ParsedModel]:
    return {name: load_fixture(name) for name in ("otp", "jam", "loop")}


@pytest.fixture(scope="session")
def otp(parsed_fixtures: dict[str, ParsedModel]) -> CausalModel:
    return parsed_fixtures["otp"].model


@pytest.fixture(scope="session")
def jam(parsed_fixtures: dict[str, ParsedModel]) -> CausalModel:
    return parsed_fixtures["jam"].model


@pytest.fixture(scope="session")
def loop(parsed_fixtures: dict[str, ParsedModel]) -> CausalModel:
    return parsed_fixtures["loop"].model


@pytest.fixture(scope="session")
def affects_sets(parsed_fixtures: dict[str, ParsedModel]) -> dict[str, AffectsSet]:
    """max_size 2 affects sets of every fixture, computed once per session."""

    return {name: enumerate_affects(p.model, 2) for name, p in parsed_fixtures.items()}


@pytest.fixture
def graph_factory() -> Callable[..., Graph]:
    """Build a graph from node names (prefix ``~`` for latent) and ``"P->C"`` edges."""

    def factory(names: str, *edges: str) -> Graph:
        nodes = [
            Node(name.lstrip("~"), 2, NodeKind.LATENT if name.startswith("~") else NodeKind.OBSERVED)
            for name in names.split()
        ]
        pairs = [tuple(edge.split("->")) for edge in edges]
        return Graph.build(nodes, pairs)

    return factory


@pytest.fixture()
def isolated_config(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> Path:
    """Point the configuration module at a temporary config location."""

    config_dir = tmp_path / "config"
    config_file = config_dir / "config.toml"
    monkeypatch.setattr(configuration, "_CONFIG_DIR", config_dir)
    monkeypatch.setattr(configuration, "_CONFIG_FILE", config_file)
    return config_file
