import struct

import numpy as np
import pytest
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from airship.constraints import Constraint
from airship.dataset import Dataset
from airship.errors import ChecksumMismatchError, FormatError, ParameterError
from airship.graph import (
    BuildParams,
    build_graph,
    graph_stats,
    knn_of_vertex,
    load_graph,
    save_graph,
)
from airship.search import SearchParams, vanilla_search


def test_line_neighbors(line_graph):
    assert line_graph.neighbors(2).tolist() == [1, 3]
    assert knn_of_vertex(line_graph, 2, 1).tolist() == [1]


def test_knn_of_vertex_validates(line_graph):
    with pytest.raises(ParameterError):
        knn_of_vertex(line_graph, 5, 1)
    with pytest.raises(ParameterError):
        knn_of_vertex(line_graph, 0, 0)


def test_adjacency_invariants(blob_workload):
    ds, graph, _, _ = blob_workload
    X = ds.vectors.astype(np.float64)
    M = graph.max_degree
    for v in range(graph.n):
        nb = graph.neighbors(v)
        assert 1 <= nb.size <= M
        assert v not in nb
        assert np.unique(nb).size == nb.size
        d = np.linalg.norm(X[nb] - X[v], axis=1)
        assert np.all(np.diff(d) >= -1e-9)
    s = graph.sample
    assert s.size == 500 and np.unique(s).size == 500
    assert s.min() >= 0 and s.max() < graph.n


def test_sample_size_capped_at_n(line_graph):
    assert sorted(line_graph.sample.tolist()) == [0, 1, 2, 3, 4]


def test_build_is_deterministic():
    X = np.random.default_rng(1).normal(size=(300, 8))
    p = BuildParams(8, 32, 50, 7)
    assert build_graph(Dataset(X), p) == build_graph(Dataset(X), p)
    other = build_graph(Dataset(X), BuildParams(8, 32, 50, 8))
    assert not np.array_equal(other.sample, build_graph(Dataset(X), p).sample)


def test_too_few_vectors():
    with pytest.raises(ParameterError):
        build_graph(Dataset(np.zeros((1, 3))))


def test_build_params_validation():
    with pytest.raises(ParameterError):
        BuildParams(max_degree=1)
    with pytest.raises(ParameterError):
        BuildParams(max_degree=16, ef_construction=8)


def test_blob_graph_is_connected(blob_workload):
    _, graph, _, _ = blob_workload
    A = csr_matrix((np.ones(graph.indices.size), graph.indices, graph.indptr),
                   shape=(graph.n, graph.n))
    count, _ = connected_components(A, directed=True, connection="strong")
    assert count == 1


def test_unconstrained_recall_at_one():
    # best-first search keeping 10 candidates, scored on its top hit;
    # a pool of one stalls in local minima on unclustered d=16 data
    rng = np.random.default_rng(21)
    X = rng.normal(size=(1100, 16)).astype(np.float32)
    ds = Dataset(X[:1000], np.zeros(1000, dtype=np.int64))
    graph = build_graph(ds, BuildParams(16, 64, 100, 0))
    everything = Constraint([0])
    base = X[:1000].astype(np.float64)
    hits = 0
    for i, q in enumerate(X[1000:]):
        res = vanilla_search(graph, ds, q, everything, SearchParams(K=1, variant="vanilla",
                                                                    rng_seed=i, ef=10))
        truth = int(np.argmin(np.linalg.norm(base - q, axis=1)))
        hits += int(res.ids[0] == truth)
    assert hits / 100 >= 0.9


class TestIndexFile:
    def test_round_trip(self, tmp_path, blob_workload):
        ds, graph, _, _ = blob_workload
        save_graph(graph, tmp_path / "g.idx")
        back = load_graph(tmp_path / "g.idx", expected_checksum=ds.checksum())
        assert back == graph
        save_graph(back, tmp_path / "h.idx")
        assert (tmp_path / "g.idx").read_bytes() == (tmp_path / "h.idx").read_bytes()

    def test_checksum_mismatch(self, tmp_path, line_graph):
        save_graph(line_graph, tmp_path / "g.idx")
        with pytest.raises(ChecksumMismatchError):
            load_graph(tmp_path / "g.idx", expected_checksum=line_graph.meta.checksum ^ 1)

    def test_empty_path(self):
        with pytest.raises(FileNotFoundError):
            load_graph("")

    def test_bad_magic(self, tmp_path, line_graph):
        save_graph(line_graph, tmp_path / "g.idx")
        raw = bytearray((tmp_path / "g.idx").read_bytes())
        raw[:8] = b"NOTANIDX"
        (tmp_path / "g.idx").write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="magic"):
            load_graph(tmp_path / "g.idx")

    def test_bad_version(self, tmp_path, line_graph):
        save_graph(line_graph, tmp_path / "g.idx")
        raw = bytearray((tmp_path / "g.idx").read_bytes())
        raw[8:12] = struct.pack("<I", 99)
        (tmp_path / "g.idx").write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="version"):
            load_graph(tmp_path / "g.idx")

    @pytest.mark.parametrize("cut", [10, 60, 1])
    def test_truncated(self, tmp_path, line_graph, cut):
        save_graph(line_graph, tmp_path / "g.idx")
        raw = (tmp_path / "g.idx").read_bytes()
        (tmp_path / "g.idx").write_bytes(raw[:len(raw) - cut] if cut > 1 else raw[:-4])
        with pytest.raises(FormatError):
            load_graph(tmp_path / "g.idx")


def test_stats(line_graph):
    st = graph_stats(line_graph)
    assert st["n"] == 5 and st["sample"] == 5 and st["min_degree"] >= 1
