"""Flat proximity graph: incremental build, sorted adjacency and index files."""

from __future__ import annotations

import heapq
import struct
from bisect import insort
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .dataset import Dataset
from .errors import ChecksumMismatchError, FormatError, ParameterError

MAGIC = b"AIRSHIPG"
FORMAT_VERSION = 1
# magic, version, n, d, max_degree, ef_construction, sample_size, seed, checksum
_HEADER = struct.Struct("<8sIIIIIIQQ")


@dataclass(frozen=True)
class BuildParams:
    max_degree: int = 16
    ef_construction: int = 128
    sample_size: int = 1000
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_degree < 2:
            raise ParameterError("max_degree must be >= 2")
        if self.ef_construction < self.max_degree:
            raise ParameterError("ef_construction must be >= max_degree")
        if self.sample_size < 1:
            raise ParameterError("sample_size must be >= 1")


@dataclass(frozen=True)
class BuildMeta:
    checksum: int
    rng_seed: int
    max_degree: int
    ef_construction: int
    sample_size: int
    n: int
    d: int


@dataclass(eq=False)
class ProximityGraph:
    """Adjacency in CSR form; ``neighbors(v)`` is sorted by distance to ``v``."""

    indptr: np.ndarray
    indices: np.ndarray
    sample: np.ndarray
    meta: BuildMeta
    _lists: List[np.ndarray] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.indptr = np.asarray(self.indptr, dtype=np.int64)
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.sample = np.asarray(self.sample, dtype=np.int64)
        # per-vertex views avoid re-slicing in the search hot loop
        self._lists = [self.indices[self.indptr[v]:self.indptr[v + 1]]
                       for v in range(self.n)]

    @property
    def n(self) -> int:
        return self.indptr.size - 1

    @property
    def max_degree(self) -> int:
        return self.meta.max_degree

    def neighbors(self, v: int) -> np.ndarray:
        return self._lists[v]

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    def __eq__(self, other):
        if not isinstance(other, ProximityGraph):
            return NotImplemented
        return (self.meta == other.meta
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.sample, other.sample))


def _dist(X: np.ndarray, ids, q: np.ndarray) -> np.ndarray:
    diff = X[ids] - q
    return np.sqrt((diff * diff).sum(axis=1))


def _ef_search(X, adj, q, entries, ef):
    """Beam search over a partial graph; returns (dist, id) pairs, nearest first."""
    visited = set(entries)
    d0 = _dist(X, entries, q)
    cand = [(float(d), int(v)) for d, v in zip(d0, entries)]
    heapq.heapify(cand)
    best = [(-d, -v) for d, v in cand]
    heapq.heapify(best)
    while len(best) > ef:
        heapq.heappop(best)
    while cand:
        d, v = heapq.heappop(cand)
        if len(best) >= ef and d > -best[0][0]:
            break
        fresh = [u for _, u in adj[v] if u not in visited]
        if not fresh:
            continue
        visited.update(fresh)
        for du, u in zip(_dist(X, fresh, q).tolist(), fresh):
            if len(best) < ef or du < -best[0][0]:
                heapq.heappush(cand, (du, u))
                heapq.heappush(best, (-du, -u))
                if len(best) > ef:
                    heapq.heappop(best)
    return sorted((-nd, -nv) for nd, nv in best)


def _select_neighbors(X, base_dists, ids, M):
    """Diversity-first neighbor choice, topped up with the nearest leftovers.

    A candidate is taken first if it is closer to the base vertex than to
    every candidate already taken; this keeps the long links that hold
    separated clusters together. Remaining slots go to the nearest
    unpicked candidates. ``ids`` must be sorted by ``base_dists``.
    """
    if len(ids) <= M:
        return list(range(len(ids)))
    V = X[ids]
    sq = (V * V).sum(axis=1)
    pair = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2.0 * (V @ V.T), 0.0))
    # blocked[c]: some picked p has dist(c, p) <= dist(c, base)
    blocked = (pair <= base_dists[:, None]).T.tolist()
    free = [True] * len(ids)
    picked = []
    for c in range(len(ids)):
        if free[c]:
            picked.append(c)
            if len(picked) == M:
                break
            free = [f and not b for f, b in zip(free, blocked[c])]
    if len(picked) < M:
        taken = set(picked)
        picked.extend([c for c in range(len(ids)) if c not in taken][:M - len(picked)])
    return sorted(picked)


def build_graph(dataset: Dataset, params: BuildParams = BuildParams()) -> ProximityGraph:
    """Insert vertices one by one in id order.

    Each new vertex searches the partial graph for ``ef_construction``
    candidates, links to ``max_degree`` of them and gets reciprocal edges;
    an overfull list is re-pruned with the same selection rule. Lists end
    up sorted ascending by (distance, id).
    """
    n = dataset.n
    if n < 2:
        raise ParameterError(f"need at least 2 vectors to build a graph, got {n}")
    X = dataset.vectors.astype(np.float64)
    M = params.max_degree
    adj: List[list] = [[] for _ in range(n)]
    for i in range(1, n):
        found = _ef_search(X, adj, X[i], [0], params.ef_construction)
        dists = np.array([d for d, _ in found])
        ids = [v for _, v in found]
        keep = _select_neighbors(X, dists, ids, M)
        adj[i] = [found[k] for k in keep]
        for d, j in adj[i]:
            lst = adj[j]
            insort(lst, (d, i))
            if len(lst) > M:
                keep = _select_neighbors(X, np.array([e[0] for e in lst]),
                                         [e[1] for e in lst], M)
                adj[j] = [lst[k] for k in keep]
    indptr = np.zeros(n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(lst) for lst in adj])
    indices = np.fromiter((v for lst in adj for _, v in lst), dtype=np.int64,
                          count=int(indptr[-1]))
    rng = np.random.default_rng(params.rng_seed)
    s = min(params.sample_size, n)
    sample = np.sort(rng.choice(n, size=s, replace=False))
    meta = BuildMeta(checksum=dataset.checksum(), rng_seed=params.rng_seed,
                     max_degree=M, ef_construction=params.ef_construction,
                     sample_size=params.sample_size, n=n, d=dataset.d)
    return ProximityGraph(indptr, indices, sample, meta)


def knn_of_vertex(graph: ProximityGraph, v: int, k: int) -> np.ndarray:
    """First ``k`` entries of ``v``'s distance-sorted adjacency list."""
    if not 0 <= v < graph.n:
        raise ParameterError(f"vertex id {v} out of range [0, {graph.n})")
    if k < 1:
        raise ParameterError("k must be positive")
    return graph.neighbors(v)[:k]


def save_graph(graph: ProximityGraph, path) -> None:
    m = graph.meta
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, m.n, m.d, m.max_degree,
                          m.ef_construction, m.sample_size, m.rng_seed, m.checksum)
    lengths = np.diff(graph.indptr).astype("<u4")
    with open(path, "wb") as f:
        f.write(header)
        for v in range(graph.n):
            f.write(lengths[v].tobytes())
            f.write(graph.neighbors(v).astype("<u4").tobytes())
        f.write(graph.sample.astype("<u4").tobytes())


def load_graph(path, expected_checksum: Optional[int] = None) -> ProximityGraph:
    """Read an index file, optionally checking it was built from the given data."""
    if not path:
        raise FileNotFoundError("empty index path")
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < _HEADER.size:
        raise FormatError(f"{path}: file too short for an index header")
    magic, version, n, d, M, ef, s, seed, checksum = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported index version {version}")
    if n < 2 or M < 2 or ef < M or s < 1:
        raise FormatError(f"{path}: implausible header values n={n} max_degree={M}")
    if expected_checksum is not None and checksum != expected_checksum:
        raise ChecksumMismatchError(
            f"{path}: index checksum {checksum:016x} does not match dataset "
            f"checksum {expected_checksum:016x}"
        )
    offset = _HEADER.size
    indptr = np.zeros(n + 1, dtype=np.int64)
    chunks = []
    for v in range(n):
        if offset + 4 > len(buf):
            raise FormatError(f"{path}: truncated adjacency list for vertex {v}")
        (length,) = struct.unpack_from("<I", buf, offset)
        offset += 4
        if length > M or offset + 4 * length > len(buf):
            raise FormatError(f"{path}: corrupt adjacency list for vertex {v}")
        chunks.append(np.frombuffer(buf, dtype="<u4", count=length, offset=offset))
        offset += 4 * length
        indptr[v + 1] = indptr[v] + length
    sample_len = min(s, n)
    if offset + 4 * sample_len != len(buf):
        raise FormatError(f"{path}: sample section has the wrong size")
    sample = np.frombuffer(buf, dtype="<u4", count=sample_len, offset=offset)
    indices = np.concatenate(chunks) if chunks else np.empty(0, dtype="<u4")
    if indices.size and indices.max() >= n:
        raise FormatError(f"{path}: neighbor id out of range")
    meta = BuildMeta(checksum=checksum, rng_seed=seed, max_degree=M,
                     ef_construction=ef, sample_size=s, n=n, d=d)
    return ProximityGraph(indptr, indices.astype(np.int64), sample.astype(np.int64), meta)


def graph_stats(graph: ProximityGraph) -> dict:
    degrees = np.diff(graph.indptr)
    return {"n": graph.n, "edges": int(degrees.sum()), "mean_degree": float(degrees.mean()),
            "min_degree": int(degrees.min()), "sample": int(graph.sample.size)}
