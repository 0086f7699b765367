"""Label-set constraints and the synthetic ``equal`` / ``unequal-X%`` families."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence

import numpy as np

from .errors import FormatError, ParameterError


class Constraint:
    """Predicate ``label in allowed`` over a single integer label.

    Search code only ever calls :meth:`evaluate` or its batched form
    :meth:`evaluate_many`; richer predicates can subclass and override both.
    """

    __slots__ = ("allowed", "_lut")

    def __init__(self, allowed: Iterable[int]):
        allowed = frozenset(int(a) for a in allowed)
        if not allowed:
            raise ParameterError("a constraint needs at least one allowed label")
        if min(allowed) < 0:
            raise ParameterError("label ids must be non-negative")
        lut = np.zeros(max(allowed) + 1, dtype=bool)
        lut[list(allowed)] = True
        self.allowed = allowed
        self._lut = lut

    def evaluate(self, label: int) -> bool:
        return int(label) in self.allowed

    def evaluate_many(self, labels: np.ndarray) -> np.ndarray:
        labels = np.asarray(labels, dtype=np.int64)
        size = self._lut.size
        inside = labels < size
        return inside & self._lut[np.where(inside, labels, 0)]

    def __eq__(self, other):
        return isinstance(other, Constraint) and self.allowed == other.allowed

    def __hash__(self):
        return hash(self.allowed)

    def __repr__(self):
        return f"Constraint({sorted(self.allowed)})"


def evaluate(constraint: Constraint, label: int) -> bool:
    return constraint.evaluate(label)


def selectivity(constraint: Constraint, labels: np.ndarray) -> float:
    """Exact fraction of base vectors satisfying ``constraint``."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ParameterError("selectivity of an empty label array is undefined")
    return float(np.count_nonzero(constraint.evaluate_many(labels))) / labels.size


@dataclass(frozen=True)
class ConstraintFamily:
    kind: str = "equal"
    pct: float = 10.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.kind == "unequal_pct":
            object.__setattr__(self, "kind", "unequal")
        if self.kind not in ("equal", "unequal"):
            raise ParameterError(f"unknown constraint family {self.kind!r}")
        if self.kind == "unequal" and not 0 < self.pct <= 100:
            raise ParameterError("pct must lie in (0, 100]")

    @property
    def name(self) -> str:
        if self.kind == "equal":
            return "equal"
        return f"unequal-{self.pct:g}%"


def unequal_count(pct: float, num_labels: int) -> int:
    # round half up, then keep at least one label and never the query's own
    raw = math.floor(pct * num_labels / 100.0 + 0.5)
    return min(max(raw, 1), num_labels - 1)


def synthesize_constraints(family: ConstraintFamily, query_labels: Sequence[int],
                           num_labels: int) -> List[Constraint]:
    query_labels = np.asarray(query_labels, dtype=np.int64).reshape(-1)
    if family.kind == "equal":
        return [Constraint([int(q)]) for q in query_labels]
    if num_labels < 2:
        raise ParameterError("unequal constraints need at least two labels")
    if query_labels.size and (query_labels.min() < 0 or query_labels.max() >= num_labels):
        raise ParameterError(f"query labels must lie in [0, {num_labels})")
    rng = np.random.default_rng(family.rng_seed)
    count = unequal_count(family.pct, num_labels)
    out = []
    for q in query_labels:
        pool = np.delete(np.arange(num_labels), int(q))
        out.append(Constraint(rng.choice(pool, size=count, replace=False).tolist()))
    return out


def save_constraints(constraints: Sequence[Constraint], path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as f:
        for c in constraints:
            f.write(",".join(str(a) for a in sorted(c.allowed)) + "\n")


def load_constraints(path) -> List[Constraint]:
    out = []
    with open(path, "r", encoding="ascii") as f:
        for lineno, line in enumerate(f, start=1):
            text = line.strip()
            try:
                ids = [int(tok) for tok in text.split(",")]
                out.append(Constraint(ids))
            except (ValueError, ParameterError):
                raise FormatError(f"{path}: line {lineno} is not a label list: {text!r}") from None
    return out
