"""Recall / QPS / distance-computation sweeps over search variants."""

from __future__ import annotations

import csv
import io
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

from .constraints import Constraint
from .dataset import Dataset
from .errors import ParameterError
from .graph import ProximityGraph
from .metrics import GroundTruth, mean_recall, qps
from .search import VARIANTS, SearchParams, search

CSV_HEADER = ["variant", "K", "alter_ratio", "family", "recall", "qps", "dist_comps", "skipped"]
DEFAULT_RATIOS = (0.2, 0.4, 0.6, 0.8, 1.0)
ESTIMATED = "est"

Ratio = Union[float, str]


@dataclass
class BenchConfig:
    variants: Sequence[str] = VARIANTS
    Ks: Sequence[int] = (1, 10, 100)
    ratios: Sequence[Ratio] = DEFAULT_RATIOS + (ESTIMATED,)
    family: str = "custom"
    repetitions: int = 3
    seed: int = 0
    ef: int = 0
    max_visit: int = 0
    estimator_k: int = 10
    threads: int = 1

    def __post_init__(self):
        if not self.variants:
            raise ParameterError("variant list is empty")
        if not self.Ks:
            raise ParameterError("K list is empty")
        if not self.ratios:
            raise ParameterError("alter_ratio grid is empty")
        for v in self.variants:
            if v not in VARIANTS:
                raise ParameterError(f"unknown variant {v!r}")
        for r in self.ratios:
            if r != ESTIMATED and not (isinstance(r, (int, float)) and 0 < r <= 1):
                raise ParameterError(f"alter_ratio {r!r} outside (0, 1]")
        if any(k < 1 for k in self.Ks):
            raise ParameterError("every K must be >= 1")
        if self.repetitions < 1:
            raise ParameterError("repetitions must be >= 1")
        if self.threads < 1:
            raise ParameterError("threads must be >= 1")

    def cells(self):
        """(variant, K, ratio) in output order: variant, then K, then ratio with est last."""
        variants = sorted(set(self.variants), key=VARIANTS.index)
        numeric = sorted({float(r) for r in self.ratios if r != ESTIMATED})
        ratios: List[Ratio] = numeric + ([ESTIMATED] if ESTIMATED in self.ratios else [])
        for v in variants:
            for K in sorted(set(self.Ks)):
                for r in ratios:
                    yield v, K, r


@dataclass
class BenchRecord:
    variant: str
    K: int
    alter_ratio: Ratio
    family: str
    recall: Optional[float]
    qps: float
    dist_comps: float
    skipped: int
    qps_runs: List[float] = field(default_factory=list)

    def row(self) -> List[str]:
        ratio = self.alter_ratio if self.alter_ratio == ESTIMATED else repr(float(self.alter_ratio))
        rec = "nan" if self.recall is None else repr(self.recall)
        return [self.variant, str(self.K), ratio, self.family, rec, repr(self.qps),
                repr(self.dist_comps), str(self.skipped)]


def params_for(variant: str, K: int, ratio: Ratio, config: BenchConfig) -> SearchParams:
    return SearchParams(
        K=K, variant=variant,
        alter_ratio=0.5 if ratio == ESTIMATED else float(ratio),
        alter_ratio_mode="estimated" if ratio == ESTIMATED else "fixed",
        estimator_k=config.estimator_k, max_visit=config.max_visit,
        rng_seed=config.seed, ef=config.ef,
    )


def run_queries(graph, dataset, queries, constraints, params, threads=1):
    def one(i):
        return search(graph, dataset, queries[i], constraints[i], params)

    if threads == 1:
        return [one(i) for i in range(len(constraints))]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(len(constraints))))


def run_bench(graph: ProximityGraph, dataset: Dataset, queries: np.ndarray,
              constraints: Sequence[Constraint], truth: GroundTruth,
              config: BenchConfig) -> List[BenchRecord]:
    """One record per grid cell; only the search calls are timed."""
    if len(constraints) != len(queries) or len(truth) != len(queries):
        raise ParameterError("queries, constraints and ground truth differ in length")
    if max(config.Ks) > truth.K:
        raise ParameterError(f"ground truth holds K={truth.K}, sweep asks for K={max(config.Ks)}")
    records = []
    for variant, K, ratio in config.cells():
        params = params_for(variant, K, ratio, config)
        runs = []
        results = None
        for _ in range(config.repetitions):
            t0 = time.perf_counter()
            results = run_queries(graph, dataset, queries, constraints, params, config.threads)
            runs.append(qps(max(time.perf_counter() - t0, 1e-9), len(results)))
        rec, skipped = mean_recall(results, truth.rows, K)
        dist = float(np.mean([r.stats.distance_computations for r in results]))
        records.append(BenchRecord(variant, K, ratio, config.family, rec,
                                   statistics.fmean(runs), dist, skipped, runs))
    return records


def records_to_csv(records: Sequence[BenchRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def read_csv(path) -> List[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))
