"""Shared fixtures: small hand-built hypergraphs and random-instance factories."""
import logging
import os

import numpy as np
import pytest

from hypergraph import Hypergraph
from trainer import TrainConfig

# 6 nodes, 4 hyperedges; every node has at least one membership
TOY_EDGES = [[0, 1, 2], [2, 3], [3, 4, 5], [0, 5]]
TOY_LABELS = [0, 0, 0, 1, 1, 1]

# a path 0-1-2-3-4 written as hyperedges {0,1}, {1,2}, {2,3}, {3,4}
PATH_EDGES = [[0, 1], [1, 2], [2, 3], [3, 4]]


def random_hypergraph(rng, num_nodes=8, num_edges=5, num_features=3, max_size=4, labels=False):
    """Random hypergraph with non-empty hyperedges of distinct members"""
    edges = []
    for _ in range(num_edges):
        size = int(rng.integers(1, min(max_size, num_nodes) + 1))
        edges.append(sorted(rng.choice(num_nodes, size=size, replace=False).tolist()))
    features = rng.normal(size=(num_nodes, num_features))
    y = rng.integers(0, 2, size=num_nodes) if labels else None
    return Hypergraph(num_nodes, edges, features, labels=y)


@pytest.fixture
def toy_hypergraph():
    features = np.random.default_rng(7).normal(size=(6, 3))
    return Hypergraph(6, TOY_EDGES, features, labels=TOY_LABELS)


@pytest.fixture
def path_hypergraph():
    return Hypergraph(5, PATH_EDGES, np.eye(5))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def hypergraph_factory():
    return random_hypergraph


@pytest.fixture
def small_config():
    """Cheap TrainConfig for loop-level tests"""
    return TrainConfig(embedding_dim=4, epochs=3, samples=2, seed=3, log_every=1)


@pytest.fixture
def quiet_logger():
    logger = logging.getLogger("SEHSSL.tests")
    logger.addHandler(logging.NullHandler())
    return logger


@pytest.fixture
def data_dir():
    """Directory holding real datasets; tests using it skip when unset"""
    path = os.environ.get("SEHSSL_DATA_DIR")
    if not path or not os.path.isdir(path):
        pytest.skip("SEHSSL_DATA_DIR not set")
    return path


@pytest.fixture(autouse=True)
def _no_log_files(monkeypatch):
    monkeypatch.setenv("SEHSSL_LOG_DIR", "")
