"""Exact ground truth, recall and throughput."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .constraints import Constraint
from .dataset import Dataset, load_ivecs, save_ivecs, vectors_checksum
from .errors import ChecksumMismatchError, FormatError, ParameterError
from .search import SearchResult, brute_force_constrained


def constraints_checksum(constraints: Sequence[Constraint]) -> str:
    """Digest of the canonical text form (sorted ids, comma separated)."""
    h = hashlib.sha256()
    for c in constraints:
        h.update((",".join(str(a) for a in sorted(c.allowed)) + "\n").encode("ascii"))
    return h.hexdigest()


def queries_checksum(queries: np.ndarray) -> str:
    return f"{vectors_checksum(np.asarray(queries, dtype=np.float32)):016x}"


@dataclass
class GroundTruth:
    rows: List[np.ndarray]
    K: int
    query_checksum: str
    constraint_checksum: str
    dataset_checksum: str

    def __len__(self):
        return len(self.rows)

    def verify(self, queries=None, constraints=None, dataset: Optional[Dataset] = None) -> None:
        """Raise ChecksumMismatchError unless the given inputs produced these rows."""
        checks = []
        if queries is not None:
            checks.append(("query", self.query_checksum, queries_checksum(queries)))
        if constraints is not None:
            checks.append(("constraint", self.constraint_checksum,
                           constraints_checksum(constraints)))
        if dataset is not None:
            checks.append(("dataset", self.dataset_checksum, f"{dataset.checksum():016x}"))
        for what, stored, actual in checks:
            if stored != actual:
                raise ChecksumMismatchError(
                    f"ground truth was generated for a different {what} set "
                    f"({stored[:16]} != {actual[:16]})"
                )


def generate_ground_truth(dataset: Dataset, queries, constraints: Sequence[Constraint],
                          K: int) -> GroundTruth:
    queries = np.asarray(queries, dtype=np.float32)
    if queries.ndim != 2 or queries.shape[0] != len(constraints):
        raise ParameterError(
            f"{queries.shape[0] if queries.ndim == 2 else '?'} queries "
            f"but {len(constraints)} constraints"
        )
    rows = [brute_force_constrained(dataset, q, c, K).ids.astype(np.int32)
            for q, c in zip(queries, constraints)]
    return GroundTruth(rows, K, queries_checksum(queries), constraints_checksum(constraints),
                       f"{dataset.checksum():016x}")


def save_ground_truth(gt: GroundTruth, path) -> None:
    """Rows go to ``path`` as ivecs; checksums and K to ``path + '.json'``."""
    save_ivecs(gt.rows, path)
    meta = {"K": gt.K, "num_queries": len(gt.rows), "query_checksum": gt.query_checksum,
            "constraint_checksum": gt.constraint_checksum,
            "dataset_checksum": gt.dataset_checksum}
    with open(f"{path}.json", "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def load_ground_truth(path) -> GroundTruth:
    rows = load_ivecs(path, ragged=True)
    try:
        with open(f"{path}.json", "r", encoding="utf-8") as f:
            meta = json.load(f)
        gt = GroundTruth(rows, int(meta["K"]), meta["query_checksum"],
                         meta["constraint_checksum"], meta["dataset_checksum"])
    except FileNotFoundError:
        raise FormatError(f"{path}: missing ground-truth sidecar {path}.json") from None
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"{path}.json: malformed ground-truth sidecar ({exc})") from None
    if meta.get("num_queries", len(rows)) != len(rows):
        raise FormatError(f"{path}: row count does not match its sidecar")
    return gt


def recall(result, truth_row) -> Optional[float]:
    """|A & B| / |B| with set semantics; None (skipped) when B is empty."""
    truth = {int(t) for t in np.asarray(truth_row).reshape(-1)}
    if not truth:
        return None
    ids = result.ids if isinstance(result, SearchResult) else np.asarray(result).reshape(-1)
    found = {int(i) for i in ids}
    return len(found & truth) / len(truth)


def mean_recall(results, truth_rows, K: Optional[int] = None):
    """Average recall over non-skipped queries; returns (mean or None, skipped count).

    When ``K`` is given each truth row is cut to its first K ids, so one
    ground-truth file at the largest K serves every smaller K.
    """
    values = []
    skipped = 0
    for res, row in zip(results, truth_rows):
        row = row if K is None else row[:K]
        r = recall(res, row)
        if r is None:
            skipped += 1
        else:
            values.append(r)
    return (float(np.mean(values)) if values else None), skipped


def qps(wall_time: float, num_queries: int) -> float:
    if wall_time <= 0:
        raise ParameterError("wall_time must be positive")
    return num_queries / wall_time
