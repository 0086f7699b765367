"""Input validation shared by the estimator wrappers."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils import check_array

from .constraints import Constraint
from .errors import ParameterError


def check_vectors(X, *, n_features=None, name="X"):
    X = check_array(X, dtype=np.float32, ensure_2d=True, input_name=name)
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"{name} has {X.shape[1]} features, expected {n_features}")
    return X


def check_labels(y, n_samples: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != n_samples:
        raise ValueError(f"labels must be a 1-D array of length {n_samples}")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.mod(y, 1) == 0):
            raise ValueError("labels must be integers")
    y = y.astype(np.int64)
    if y.size and y.min() < 0:
        raise ValueError("labels must be non-negative")
    return y


def check_constraints(constraints, n_queries: int) -> list:
    """Accept one constraint for all queries, or one per query.

    A constraint may be a :class:`Constraint`, a single label id, or an
    iterable of allowed label ids.
    """
    if _is_single(constraints):
        return [as_constraint(constraints)] * n_queries
    out = [as_constraint(c) for c in constraints]
    if len(out) != n_queries:
        raise ParameterError(f"{len(out)} constraints for {n_queries} queries")
    return out


def _is_single(obj) -> bool:
    if isinstance(obj, (Constraint, numbers.Integral)):
        return True
    try:
        items = list(obj)
    except TypeError:
        return False
    return all(isinstance(i, numbers.Integral) for i in items)


def as_constraint(obj) -> Constraint:
    if isinstance(obj, Constraint):
        return obj
    if isinstance(obj, numbers.Integral):
        return Constraint([int(obj)])
    return Constraint(obj)
