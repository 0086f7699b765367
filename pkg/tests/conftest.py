import numpy as np
import pytest

from airship.dataset import Dataset, LabelingConfig, assign_cluster_labels, gaussian_blobs
from airship.graph import BuildParams, build_graph

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def line_dataset():
    # five points on a line at x = 0..4, one shared label
    X = np.arange(5, dtype=np.float32).reshape(-1, 1)
    return Dataset(X, np.zeros(5, dtype=np.int64))


@pytest.fixture
def line_graph(line_dataset):
    return build_graph(line_dataset, BuildParams(max_degree=2, ef_construction=4, sample_size=5))


@pytest.fixture(scope="session")
def blob_workload():
    """2,000 base vectors in 10 blobs (d=16) with clean k-means labels, 50 queries."""
    X, _, _ = gaussian_blobs(2050, 16, 10, spread=2.0, seed=11)
    centers = []
    base = Dataset(X[:2000])
    labels = assign_cluster_labels(base, LabelingConfig(10, 0.0, 25, 5), centers_out=centers)
    ds = base.with_labels(labels)
    graph = build_graph(ds, BuildParams(max_degree=16, ef_construction=64, sample_size=500,
                                        rng_seed=3))
    return ds, graph, X[2000:], centers[0]
