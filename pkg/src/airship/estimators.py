"""scikit-learn style wrappers around labeling and constrained search."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from . import search as _search
from ._validation import check_constraints, check_labels, check_vectors
from .dataset import Dataset, lloyd_kmeans, nearest_centroid, randomize_labels
from .errors import ParameterError
from .graph import BuildParams, ProximityGraph, build_graph


class ClusterLabeler(ClusterMixin, BaseEstimator):
    """k-means cluster ids as labels, each replaced by a random id with probability R%.

    ``fit(X).labels_`` equals ``assign_cluster_labels`` for the same seed.
    ``predict`` labels new vectors (e.g. queries) with the fitted centers and
    the same randomness, drawn from a stream independent of ``fit``.
    """

    def __init__(self, n_clusters=10, randomness=0.0, max_iter=25, random_state=0):
        self.n_clusters = n_clusters
        self.randomness = randomness
        self.max_iter = max_iter
        self.random_state = random_state

    def _check_params(self):
        if self.n_clusters < 1:
            raise ParameterError("n_clusters must be >= 1")
        if not 0 <= self.randomness <= 100:
            raise ParameterError("randomness must lie in [0, 100]")
        if self.max_iter < 1:
            raise ParameterError("max_iter must be positive")

    def fit(self, X, y=None):
        self._check_params()
        X = check_vectors(X)
        rng = np.random.default_rng(self.random_state)
        self.cluster_centers_ = lloyd_kmeans(X, self.n_clusters, self.max_iter, rng)
        clean = nearest_centroid(X, self.cluster_centers_)
        self.labels_ = randomize_labels(clean, self.n_clusters, self.randomness, rng)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        X = check_vectors(X, n_features=self.n_features_in_)
        rng = np.random.default_rng([self.random_state, 1])
        clean = nearest_centroid(X, self.cluster_centers_)
        return randomize_labels(clean, self.n_clusters, self.randomness, rng)


class AirshipIndex(BaseEstimator):
    """Proximity-graph index answering label-constrained k-nearest-neighbor queries.

    Parameters
    ----------
    n_neighbors : int
        K, the number of hits per query.
    variant : {"vanilla", "start", "alter", "alter_prefer"}
    alter_ratio : float in (0, 1] or "estimated"
        Target share of pops from the satisfied queue. "estimated" derives it
        per query from the starting points' graph neighborhoods.
    ef : int
        Result-pool size for the stopping rule; 0 uses ``n_neighbors``.
    max_visit : int
        Cap on popped vertices per query; 0 is unbounded.
    max_degree, ef_construction, sample_size : int
        Graph build parameters.
    random_state : int
        Seeds the graph's starting-point sample and vanilla's random start.
    """

    def __init__(self, n_neighbors=10, variant="alter_prefer", alter_ratio="estimated",
                 estimator_k=10, ef=0, max_visit=0, max_degree=16, ef_construction=128,
                 sample_size=1000, random_state=0):
        self.n_neighbors = n_neighbors
        self.variant = variant
        self.alter_ratio = alter_ratio
        self.estimator_k = estimator_k
        self.ef = ef
        self.max_visit = max_visit
        self.max_degree = max_degree
        self.ef_construction = ef_construction
        self.sample_size = sample_size
        self.random_state = random_state

    def fit(self, X, y):
        """Build the graph over ``X``; ``y`` holds one integer label per row."""
        X = check_vectors(X)
        y = check_labels(y, X.shape[0])
        self._search_params()
        params = BuildParams(self.max_degree, self.ef_construction, self.sample_size,
                             self.random_state)
        self.dataset_ = Dataset(X, y)
        self.graph_ = build_graph(self.dataset_, params)
        self.n_features_in_ = X.shape[1]
        return self

    @classmethod
    def from_index(cls, graph: ProximityGraph, dataset: Dataset, **params):
        """Wrap an already built (e.g. loaded) graph without rebuilding."""
        if graph.n != dataset.n or graph.meta.checksum != dataset.checksum():
            raise ParameterError("graph was not built over this dataset")
        est = cls(max_degree=graph.meta.max_degree,
                  ef_construction=graph.meta.ef_construction,
                  sample_size=graph.meta.sample_size, random_state=graph.meta.rng_seed,
                  **params)
        est.graph_ = graph
        est.dataset_ = dataset
        est.n_features_in_ = dataset.d
        return est

    def _search_params(self, n_neighbors=None) -> _search.SearchParams:
        estimated = isinstance(self.alter_ratio, str)
        if estimated and self.alter_ratio != "estimated":
            raise ParameterError("alter_ratio must be a float or 'estimated'")
        return _search.SearchParams(
            K=self.n_neighbors if n_neighbors is None else n_neighbors,
            variant=self.variant,
            alter_ratio=0.5 if estimated else float(self.alter_ratio),
            alter_ratio_mode="estimated" if estimated else "fixed",
            estimator_k=self.estimator_k,
            max_visit=self.max_visit,
            rng_seed=self.random_state,
            ef=self.ef,
        )

    def search(self, query, constraint, n_neighbors=None) -> _search.SearchResult:
        """One query; returns the full SearchResult including traversal stats."""
        check_is_fitted(self, "graph_")
        q = check_vectors(np.atleast_2d(query), n_features=self.n_features_in_, name="query")
        (c,) = check_constraints(constraint, 1)
        return _search.search(self.graph_, self.dataset_, q[0], c,
                              self._search_params(n_neighbors))

    def kneighbors(self, X, constraints, n_neighbors=None, return_distance=True):
        """Constrained neighbors for each row of ``X``.

        Rows with fewer than K satisfied hits are padded with index -1 and
        distance ``inf``.
        """
        check_is_fitted(self, "graph_")
        X = check_vectors(X, n_features=self.n_features_in_)
        cons = check_constraints(constraints, X.shape[0])
        params = self._search_params(n_neighbors)
        K = params.K
        ind = np.full((X.shape[0], K), -1, dtype=np.int64)
        dist = np.full((X.shape[0], K), np.inf)
        for row, (q, c) in enumerate(zip(X, cons)):
            res = _search.search(self.graph_, self.dataset_, q, c, params)
            ind[row, :len(res.hits)] = res.ids
            dist[row, :len(res.hits)] = res.distances
        return (dist, ind) if return_distance else ind
