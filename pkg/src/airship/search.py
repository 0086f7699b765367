"""Constrained best-first search over a proximity graph.

Four variants share one traversal skeleton:

* ``vanilla``      single queue, one random starting vertex
* ``start``        single queue, seeded with every sampled satisfied vertex
* ``alter``        two queues (satisfied / other) popped at a target ratio
* ``alter_prefer`` as ``alter``, but the satisfied queue wins whenever its
                   best candidate is at least as close as the other's

Distances are Euclidean, computed in float64. Equal distances are broken by
the lower vertex id everywhere (queues, result heap and the exact oracle).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .constraints import Constraint
from .dataset import Dataset
from .errors import ParameterError
from .graph import ProximityGraph, knn_of_vertex

VARIANTS = ("vanilla", "start", "alter", "alter_prefer")
ALTER_RATIO_FLOOR = 0.05

SAT = "sat"
OTHER = "other"


@dataclass(frozen=True)
class SearchParams:
    K: int = 10
    variant: str = "alter_prefer"
    alter_ratio: float = 0.5
    alter_ratio_mode: str = "fixed"
    estimator_k: int = 10
    max_visit: int = 0
    rng_seed: int = 0
    # result-pool size for the convergence test; 0 means K
    ef: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ParameterError("K must be >= 1")
        if self.variant not in VARIANTS:
            raise ParameterError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not 0 < self.alter_ratio <= 1:
            raise ParameterError("alter_ratio must lie in (0, 1]")
        if self.alter_ratio_mode not in ("fixed", "estimated"):
            raise ParameterError("alter_ratio_mode must be 'fixed' or 'estimated'")
        if self.estimator_k < 1:
            raise ParameterError("estimator_k must be >= 1")
        if self.max_visit < 0:
            raise ParameterError("max_visit must be >= 0")
        if self.ef < 0:
            raise ParameterError("ef must be >= 0")

    @property
    def pool_size(self) -> int:
        return max(self.K, self.ef)


@dataclass
class SearchStats:
    distance_computations: int = 0
    vertices_popped: int = 0
    satisfied_popped: int = 0
    terminated_by: str = "exhaustion"
    # None, "linear_scan" (no sampled start satisfied) or "brute_force"
    fallback: Optional[str] = None
    alter_ratio: Optional[float] = None


@dataclass
class SearchResult:
    hits: List[Tuple[int, float]]
    stats: SearchStats = field(default_factory=SearchStats)

    @property
    def ids(self) -> np.ndarray:
        return np.array([h[0] for h in self.hits], dtype=np.int64)

    @property
    def distances(self) -> np.ndarray:
        return np.array([h[1] for h in self.hits], dtype=np.float64)

    @property
    def skipped(self) -> bool:
        """True when the search proved that no vector satisfies the constraint."""
        return not self.hits and self.stats.terminated_by == "exhaustion"


@dataclass
class SearchState:
    """Per-query mutable state; queues hold (distance, vertex id) pairs."""

    visited: np.ndarray
    pq_sat: list = field(default_factory=list)
    pq_other: list = field(default_factory=list)
    topk: list = field(default_factory=list)  # max-heap as (-dist, -id)
    cnt_sat: int = 0
    cnt_total: int = 0

    def offer(self, dist: float, v: int, K: int) -> None:
        heapq.heappush(self.topk, (-dist, -v))
        if len(self.topk) > K:
            heapq.heappop(self.topk)

    def converged(self, dist: float, K: int) -> bool:
        return len(self.topk) == K and dist > -self.topk[0][0]

    def result(self, K: int) -> List[Tuple[int, float]]:
        hits = sorted(((-nv, -nd) for nd, nv in self.topk), key=lambda h: (h[1], h[0]))
        return hits[:K]


def query_distances(vectors: np.ndarray, ids, query: np.ndarray) -> np.ndarray:
    diff = vectors[ids].astype(np.float64) - query
    return np.sqrt((diff * diff).sum(axis=1))


def _check_query(dataset: Dataset, query) -> np.ndarray:
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if q.size != dataset.d:
        raise ParameterError(f"query has dimension {q.size}, dataset has {dataset.d}")
    if not np.all(np.isfinite(q)):
        raise ParameterError("query contains non-finite values")
    return q


def _check_inputs(graph: ProximityGraph, dataset: Dataset) -> None:
    if graph.n == 0 or dataset.n == 0:
        raise ParameterError("cannot search an empty graph")
    if graph.n != dataset.n:
        raise ParameterError(f"graph has {graph.n} vertices, dataset has {dataset.n} vectors")
    if dataset.labels.size != dataset.n:
        raise ParameterError("dataset has no labels to evaluate constraints against")


def linear_scan_filter(dataset: Dataset, constraint: Constraint) -> np.ndarray:
    """Ids of all satisfied vectors, in id order. No distances are computed."""
    return np.flatnonzero(constraint.evaluate_many(dataset.labels)).astype(np.int64)


def sample_starting_points(graph: ProximityGraph, dataset: Dataset,
                           constraint: Constraint) -> np.ndarray:
    """Members of the build-time sample that satisfy ``constraint``."""
    return sampled_satisfied(graph, dataset.labels, constraint)


def sampled_satisfied(graph: ProximityGraph, labels: np.ndarray,
                      constraint: Constraint) -> np.ndarray:
    sample = graph.sample
    return sample[constraint.evaluate_many(labels[sample])]


def brute_force_constrained(dataset: Dataset, query, constraint: Constraint,
                            K: int) -> SearchResult:
    """Exact top-K among satisfied vectors; the ground-truth oracle."""
    if K < 1:
        raise ParameterError("K must be >= 1")
    q = _check_query(dataset, query)
    ids = linear_scan_filter(dataset, constraint)
    d = query_distances(dataset.vectors, ids, q)
    order = np.lexsort((ids, d))[:K]
    stats = SearchStats(distance_computations=int(ids.size))
    return SearchResult([(int(ids[i]), float(d[i])) for i in order], stats)


def _resolve_starts(graph, dataset, q, constraint, K):
    """Sampled satisfied starts, or the scan/brute-force fallbacks.

    Returns (starts, fallback_name, early_result); ``early_result`` is set
    when fewer than K vectors satisfy and the exact ranking is returned
    directly.
    """
    starts = sample_starting_points(graph, dataset, constraint)
    if starts.size:
        return starts, None, None
    starts = linear_scan_filter(dataset, constraint)
    if starts.size >= K:
        return starts, "linear_scan", None
    res = brute_force_constrained(dataset, q, constraint, K)
    res.stats.fallback = "brute_force"
    return starts, "brute_force", res


def vanilla_search(graph: ProximityGraph, dataset: Dataset, query,
                   constraint: Constraint, params: SearchParams) -> SearchResult:
    """Single-queue best-first search; only satisfied pops enter the top-K."""
    if params.variant not in ("vanilla", "start"):
        raise ParameterError(f"vanilla_search does not run variant {params.variant!r}")
    _check_inputs(graph, dataset)
    q = _check_query(dataset, query)
    K = params.K
    L = params.pool_size
    stats = SearchStats()
    if params.variant == "vanilla":
        rng = np.random.default_rng(params.rng_seed)
        starts = np.array([rng.integers(graph.n)], dtype=np.int64)
    else:
        starts, stats.fallback, early = _resolve_starts(graph, dataset, q, constraint, K)
        if early is not None:
            return early

    vectors, labels = dataset.vectors, dataset.labels
    state = SearchState(visited=np.zeros(graph.n, dtype=bool))
    state.visited[starts] = True
    d0 = query_distances(vectors, starts, q)
    stats.distance_computations += int(starts.size)
    pq = list(zip(d0.tolist(), starts.tolist()))
    heapq.heapify(pq)

    while pq:
        if params.max_visit and stats.vertices_popped >= params.max_visit:
            stats.terminated_by = "budget"
            break
        now_dist, now = heapq.heappop(pq)
        stats.vertices_popped += 1
        if state.converged(now_dist, L):
            stats.terminated_by = "convergence"
            break
        if constraint.evaluate(labels[now]):
            stats.satisfied_popped += 1
            state.offer(now_dist, now, L)
        nbrs = graph.neighbors(now)
        fresh = nbrs[~state.visited[nbrs]]
        if fresh.size:
            state.visited[fresh] = True
            dists = query_distances(vectors, fresh, q)
            stats.distance_computations += int(fresh.size)
            for item in zip(dists.tolist(), fresh.tolist()):
                heapq.heappush(pq, item)
    return SearchResult(state.result(params.K), stats)


def select_priority_queue(state: SearchState, alter_ratio: float, prefer: bool) -> str:
    """Which queue the next iteration pops: ``SAT`` or ``OTHER``.

    Pure decision; the caller updates ``cnt_sat`` / ``cnt_total``.
    """
    if not state.pq_sat and not state.pq_other:
        raise ParameterError("select_priority_queue called with both queues empty")
    if not state.pq_other:
        return SAT
    if not state.pq_sat:
        return OTHER
    if prefer and state.pq_sat[0][0] <= state.pq_other[0][0]:
        return SAT
    # 0/0 counts as ratio 0: the search opens on the satisfied queue
    if state.cnt_total == 0 or state.cnt_sat / state.cnt_total <= alter_ratio:
        return SAT
    return OTHER


def estimate_alter_ratio(graph: ProximityGraph, labels: np.ndarray, constraint: Constraint,
                         starts, estimator_k: int = 10) -> float:
    """Mean fraction of satisfied vertices among each start's first k graph neighbors.

    Reads only adjacency lists, never vectors. A start with degree below k
    is scored over its whole list rather than over k; a start with no
    neighbors carries no information and is left out. The result is
    floored at ``ALTER_RATIO_FLOOR`` so the satisfied queue stays
    schedulable.
    """
    starts = np.asarray(starts, dtype=np.int64).reshape(-1)
    if starts.size == 0:
        raise ParameterError("estimate_alter_ratio needs at least one starting vertex")
    fractions = []
    for v in starts.tolist():
        nbrs = knn_of_vertex(graph, v, estimator_k)
        if nbrs.size:
            fractions.append(np.count_nonzero(constraint.evaluate_many(labels[nbrs])) / nbrs.size)
    raw = float(np.mean(fractions)) if fractions else 0.0
    return min(max(raw, ALTER_RATIO_FLOOR), 1.0)


def airship_search(graph: ProximityGraph, dataset: Dataset, query,
                   constraint: Constraint, params: SearchParams) -> SearchResult:
    """Two-queue search seeded from the sampled satisfied vertices.

    Runs while either queue is non-empty; each pop comes from the queue
    chosen by :func:`select_priority_queue`, and only pops from the
    satisfied queue can enter the top-K.
    """
    if params.variant not in ("alter", "alter_prefer"):
        raise ParameterError(f"airship_search does not run variant {params.variant!r}")
    _check_inputs(graph, dataset)
    q = _check_query(dataset, query)
    K = params.K
    L = params.pool_size
    stats = SearchStats()
    starts, stats.fallback, early = _resolve_starts(graph, dataset, q, constraint, K)
    if early is not None:
        return early

    vectors, labels = dataset.vectors, dataset.labels
    if params.alter_ratio_mode == "estimated":
        alter_ratio = estimate_alter_ratio(graph, labels, constraint, starts, params.estimator_k)
    else:
        alter_ratio = params.alter_ratio
    stats.alter_ratio = alter_ratio
    prefer = params.variant == "alter_prefer"

    state = SearchState(visited=np.zeros(graph.n, dtype=bool))
    state.visited[starts] = True
    d0 = query_distances(vectors, starts, q)
    stats.distance_computations += int(starts.size)
    state.pq_sat = list(zip(d0.tolist(), starts.tolist()))
    heapq.heapify(state.pq_sat)

    while state.pq_sat or state.pq_other:
        if params.max_visit and stats.vertices_popped >= params.max_visit:
            stats.terminated_by = "budget"
            break
        which = select_priority_queue(state, alter_ratio, prefer)
        if which == SAT:
            state.cnt_sat += 1
        state.cnt_total += 1
        now_dist, now = heapq.heappop(state.pq_sat if which == SAT else state.pq_other)
        stats.vertices_popped += 1
        if state.converged(now_dist, L):
            stats.terminated_by = "convergence"
            break
        if which == SAT:
            stats.satisfied_popped += 1
            state.offer(now_dist, now, L)
        nbrs = graph.neighbors(now)
        fresh = nbrs[~state.visited[nbrs]]
        if fresh.size:
            state.visited[fresh] = True
            dists = query_distances(vectors, fresh, q).tolist()
            sat = constraint.evaluate_many(labels[fresh]).tolist()
            stats.distance_computations += int(fresh.size)
            for du, u, ok in zip(dists, fresh.tolist(), sat):
                heapq.heappush(state.pq_sat if ok else state.pq_other, (du, u))
    return SearchResult(state.result(params.K), stats)


def search(graph: ProximityGraph, dataset: Dataset, query, constraint: Constraint,
           params: SearchParams) -> SearchResult:
    """Dispatch on ``params.variant``."""
    if params.variant in ("vanilla", "start"):
        return vanilla_search(graph, dataset, query, constraint, params)
    return airship_search(graph, dataset, query, constraint, params)
