"""Input validation helpers for the estimator API."""
from __future__ import annotations

import numpy as np

from .errors import ContractError
from .queries import Evidence, Query, Response


def check_feature_matrix(X, n_features: int | None = None) -> np.ndarray:
    """Coerce to a finite float64 2-D array, optionally pinning the width."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ContractError(f"expected a 2-D feature matrix, got ndim={X.ndim}")
    if not np.all(np.isfinite(X)):
        raise ContractError("feature matrix contains non-finite values")
    if n_features is not None and X.shape[1] != n_features:
        raise ContractError(
            f"feature matrix has {X.shape[1]} columns, expected {n_features}")
    return X


def check_unit_vector(w, tol: float = 1e-9) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    norm = np.linalg.norm(w)
    if abs(norm - 1.0) > tol:
        raise ContractError(f"expected a unit vector, got norm {norm}")
    return w


def check_evidence_sequence(X) -> list[Evidence]:
    """Accept Evidence objects or (query, response) pairs."""
    out = []
    for i, item in enumerate(X):
        if isinstance(item, Evidence):
            out.append(item)
        elif isinstance(item, tuple) and len(item) == 2 \
                and isinstance(item[1], Response):
            out.append(Evidence(query=item[0], response=item[1]))
        else:
            raise ContractError(
                f"item {i} is not Evidence or a (query, response) pair")
    return out
