"""Vector datasets, texmex-style fvecs/ivecs I/O and k-means label synthesis.

fvecs/ivecs layout: each record is a little-endian int32 dimension followed
by that many little-endian float32 (fvecs) or int32 (ivecs) values.
Labels live in a sidecar text file, one decimal integer per line.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import FormatError, ParameterError

_I32 = np.dtype("<i4")
_F32 = np.dtype("<f4")


@dataclass(frozen=True)
class Dataset:
    """n base vectors of dimension d with one integer label per vector.

    ``labels`` may be empty for freshly loaded vectors that have not been
    labeled yet.
    """

    vectors: np.ndarray
    labels: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if vectors.ndim != 2:
            raise ParameterError(f"vectors must be 2-D, got shape {vectors.shape}")
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if labels.size and labels.size != vectors.shape[0]:
            raise ParameterError(
                f"{labels.size} labels for {vectors.shape[0]} vectors"
            )
        if labels.size and labels.min() < 0:
            raise ParameterError("label ids must be non-negative")
        vectors.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    @property
    def num_labels(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def with_labels(self, labels) -> "Dataset":
        return Dataset(self.vectors, labels)

    def checksum(self) -> int:
        """64-bit digest of the vector payload (labels excluded)."""
        return vectors_checksum(self.vectors)


def vectors_checksum(vectors: np.ndarray) -> int:
    arr = np.ascontiguousarray(vectors, dtype=_F32)
    h = hashlib.sha256()
    h.update(np.asarray(arr.shape, dtype="<u8").tobytes())
    h.update(arr.tobytes())
    return int.from_bytes(h.digest()[:8], "little")


def file_checksum(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _read_records(path, payload: np.dtype, ragged: bool):
    with open(path, "rb") as f:
        buf = f.read()
    rows = []
    dim = None
    offset = 0
    total = len(buf)
    while offset < total:
        if offset + 4 > total:
            raise FormatError(f"{path}: truncated record header at byte offset {offset}")
        d = int(np.frombuffer(buf, dtype=_I32, count=1, offset=offset)[0])
        if d < 0:
            raise FormatError(f"{path}: negative dimension {d} at byte offset {offset}")
        if dim is None:
            dim = d
        elif d != dim and not ragged:
            raise FormatError(
                f"{path}: record {len(rows)} has dimension {d}, expected {dim}"
            )
        end = offset + 4 + 4 * d
        if end > total:
            raise FormatError(f"{path}: truncated record at byte offset {offset}")
        rows.append(np.frombuffer(buf, dtype=payload, count=d, offset=offset + 4))
        offset = end
    return rows, dim


def _write_records(rows, path, payload: np.dtype) -> None:
    try:
        with open(path, "wb") as f:
            for row in rows:
                row = np.asarray(row, dtype=payload).reshape(-1)
                f.write(np.int32(row.size).astype(_I32).tobytes())
                f.write(row.tobytes())
    except OSError as exc:
        raise OSError(f"cannot write {path!r}: {exc}") from exc


def load_fvecs(path) -> Dataset:
    """Read an fvecs file into an unlabeled Dataset (n may be 0)."""
    rows, dim = _read_records(path, _F32, ragged=False)
    if not rows:
        return Dataset(np.empty((0, 0), dtype=np.float32))
    return Dataset(np.stack(rows).astype(np.float32))


def save_fvecs(dataset, path) -> None:
    vectors = dataset.vectors if isinstance(dataset, Dataset) else np.asarray(dataset)
    if vectors.ndim != 2:
        raise ParameterError("expected a 2-D array of vectors")
    _write_records(vectors, path, _F32)


def load_ivecs(path, ragged: bool = False):
    """Read an ivecs file.

    Returns an (n, d) int32 array, or a list of 1-D arrays when ``ragged``
    (ground-truth rows can be shorter than K).
    """
    rows, dim = _read_records(path, _I32, ragged=ragged)
    if ragged:
        return [r.astype(np.int32) for r in rows]
    if not rows:
        return np.empty((0, 0), dtype=np.int32)
    return np.stack(rows).astype(np.int32)


def save_ivecs(rows, path) -> None:
    if isinstance(rows, np.ndarray) and rows.ndim != 2:
        raise ParameterError("expected a 2-D array or a list of rows")
    _write_records(rows, path, _I32)


def load_labels(path) -> np.ndarray:
    labels = []
    with open(path, "r", encoding="ascii") as f:
        for lineno, line in enumerate(f, start=1):
            text = line.strip()
            try:
                value = int(text)
            except ValueError:
                raise FormatError(
                    f"{path}: line {lineno} is not an integer: {text!r}"
                ) from None
            if value < 0:
                raise FormatError(f"{path}: line {lineno} has negative label {value}")
            labels.append(value)
    return np.asarray(labels, dtype=np.int64)


def save_labels(labels, path) -> None:
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    try:
        with open(path, "w", encoding="ascii", newline="\n") as f:
            f.writelines(f"{int(v)}\n" for v in labels)
    except OSError as exc:
        raise OSError(f"cannot write {path!r}: {exc}") from exc


@dataclass(frozen=True)
class LabelingConfig:
    num_clusters: int = 10
    randomness_pct: float = 0.0
    kmeans_iters: int = 25
    rng_seed: int = 0

    def __post_init__(self):
        if self.num_clusters < 1:
            raise ParameterError("num_clusters must be >= 1")
        if not 0 <= self.randomness_pct <= 100:
            raise ParameterError("randomness_pct must lie in [0, 100]")
        if self.kmeans_iters < 1:
            raise ParameterError("kmeans_iters must be positive")


def _sq_dists(X: np.ndarray, centers: np.ndarray, chunk: int = 8192) -> np.ndarray:
    # Explicit differences rather than the expanded dot-product form so
    # that argmin ties are reproducible.
    out = np.empty((X.shape[0], centers.shape[0]), dtype=np.float64)
    C = centers.astype(np.float64)
    for start in range(0, X.shape[0], chunk):
        block = X[start:start + chunk].astype(np.float64)
        diff = block[:, None, :] - C[None, :, :]
        out[start:start + chunk] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def nearest_centroid(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Index of the nearest center per row; ties go to the lowest index."""
    return np.argmin(_sq_dists(X, centers), axis=1).astype(np.int64)


def lloyd_kmeans(X: np.ndarray, k: int, iters: int, rng: np.random.Generator) -> np.ndarray:
    """Lloyd's k-means from k distinct random points; returns the centers.

    An emptied cluster is re-seeded with the point of the largest cluster
    that lies farthest from that cluster's center.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < k:
        raise ParameterError(f"cannot form {k} clusters from {n} vectors")
    centers = X[rng.choice(n, size=k, replace=False)].copy()
    for _ in range(iters):
        d2 = _sq_dists(X, centers)
        assign = np.argmin(d2, axis=1)
        counts = np.bincount(assign, minlength=k)
        for empty in np.flatnonzero(counts == 0):
            big = int(np.argmax(counts))
            members = np.flatnonzero(assign == big)
            far = members[np.argmax(d2[members, big])]
            assign[far] = empty
            counts[big] -= 1
            counts[empty] += 1
        sums = np.zeros_like(centers)
        np.add.at(sums, assign, X)
        centers = sums / counts[:, None]
    return centers


def randomize_labels(labels: np.ndarray, k: int, randomness_pct: float,
                     rng: np.random.Generator) -> np.ndarray:
    """Replace each label, with probability R/100, by a uniform draw in [0, k)."""
    labels = np.array(labels, dtype=np.int64, copy=True)
    flip = rng.random(labels.size) < randomness_pct / 100.0
    draws = rng.integers(0, k, size=labels.size)
    labels[flip] = draws[flip]
    return labels


def assign_cluster_labels(dataset: Dataset, config: LabelingConfig,
                          centers_out: Optional[list] = None) -> np.ndarray:
    """Cluster ids from k-means, each replaced by a random id with probability R%.

    Pass a list as ``centers_out`` to receive the fitted centers (used to
    label query vectors the same way).
    """
    if dataset.n < config.num_clusters:
        raise ParameterError(
            f"dataset has {dataset.n} vectors, fewer than num_clusters={config.num_clusters}"
        )
    rng = np.random.default_rng(config.rng_seed)
    centers = lloyd_kmeans(dataset.vectors, config.num_clusters, config.kmeans_iters, rng)
    labels = nearest_centroid(dataset.vectors, centers)
    labels = randomize_labels(labels, config.num_clusters, config.randomness_pct, rng)
    if centers_out is not None:
        centers_out.append(centers)
    return labels


def gaussian_blobs(n: int, d: int, centers: int, *, spread: float = 1.0,
                   std: float = 1.0, seed: int = 0):
    """Synthetic clustered data: returns (vectors float32, blob ids, blob centers)."""
    rng = np.random.default_rng(seed)
    mu = rng.normal(scale=spread, size=(centers, d))
    blob = rng.integers(0, centers, size=n)
    X = mu[blob] + rng.normal(scale=std, size=(n, d))
    return X.astype(np.float32), blob.astype(np.int64), mu

