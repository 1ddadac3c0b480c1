import numpy as np
import pytest

from src.hierarchy.structure import build_from_edges

THREE_LEVEL_EDGES = [
    ("Total", "A"), ("Total", "B"),
    ("A", "AA"), ("A", "AB"),
    ("B", "BA"), ("B", "BB"),
]
TWO_LEVEL_EDGES = [("X", "Y"), ("X", "Z")]


def random_tree(rng, n_min=4, n_max=40):
    """A random single-root tree with labels N0..N{n-1}"""
    n = int(rng.integers(n_min, n_max + 1))
    edges = [(f"N{int(rng.integers(0, i))}", f"N{i}") for i in range(1, n)]
    return build_from_edges(edges)


@pytest.fixture
def three_level():
    return build_from_edges(THREE_LEVEL_EDGES)


@pytest.fixture
def two_level():
    return build_from_edges(TWO_LEVEL_EDGES)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def tree_factory():
    return random_tree


@pytest.fixture(autouse=True)
def isolated_config(tmp_path, monkeypatch):
    """Keep Config away from the user's home directory"""
    monkeypatch.setenv("RECON_CONFIG_DIR", str(tmp_path / "config"))
