from pathlib import Path

import pytest

from config import settings_manager
from routing_core.network import enumerate_paths
from routing_core.network_loader import load_network

NETWORKS = Path(__file__).resolve().parents[1] / "networks"

EXAMPLE1_OPTIMUM = 193.54
EXAMPLE1_UNDIFFERENTIATED = 195.597


def two_link_document(link1: dict, link2: dict, demand_h: float, demand_a: float) -> dict:
    """
    Two parallel links A->B with a single O/D pair.
    """
    return {
        "nodes": ["A", "B"],
        "links": [
            {"id": "1", "tail": "A", "head": "B", **link1},
            {"id": "2", "tail": "A", "head": "B", **link2},
        ],
        "od_pairs": [{"id": "AB", "origin": "A", "destination": "B", "demand_h": demand_h, "demand_a": demand_a}],
    }


@pytest.fixture(autouse=True)
def isolated_settings(monkeypatch):
    monkeypatch.setenv("TOLLGRID_THREADS", "1")
    monkeypatch.delenv("TOLLGRID_PROFILE", raising=False)
    monkeypatch.delenv("SOLVER_CONFIG_FILE", raising=False)
    settings_manager.reset_cache()
    yield
    settings_manager.reset_cache()


@pytest.fixture(scope="session")
def networks_dir() -> Path:
    return NETWORKS


@pytest.fixture(scope="session")
def example1():
    return load_network(NETWORKS / "example1.net")


@pytest.fixture(scope="session")
def example1_paths(example1):
    return enumerate_paths(example1)


@pytest.fixture(scope="session")
def pigou2():
    return load_network(NETWORKS / "pigou2.net")


@pytest.fixture(scope="session")
def pigou2_paths(pigou2):
    return enumerate_paths(pigou2)


@pytest.fixture(scope="session")
def single_link():
    return load_network(NETWORKS / "single_link.net")


@pytest.fixture(scope="session")
def single_link_paths(single_link):
    return enumerate_paths(single_link)
