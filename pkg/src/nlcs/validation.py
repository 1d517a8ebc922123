"""Input validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def as_score_matrix(X, n: int | None = None, c: int | None = None, name: str = "scores") -> np.ndarray:
    """Coerce to a dense float64 (n, c) matrix and check for NaN/Inf."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {X.shape}")
    if n is not None and X.shape[0] != n:
        raise ValueError(f"{name} has {X.shape[0]} rows, expected {n}")
    if c is not None and X.shape[1] != c:
        raise ValueError(f"{name} has {X.shape[1]} columns, expected {c}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    return X


def check_finite(X, name: str = "matrix") -> np.ndarray:
    X = np.asarray(X)
    if not np.all(np.isfinite(X)):
        raise FloatingPointError(f"{name} contains non-finite entries")
    return X


def as_index_array(idx, n: int, name: str = "index set") -> np.ndarray:
    """Coerce an index collection to a sorted, unique int64 array within [0, n)."""
    idx = np.asarray(idx, dtype=np.int64).ravel()
    if idx.size:
        if idx.min() < 0 or idx.max() >= n:
            raise ValueError(f"{name} contains ids outside [0, {n})")
        idx = np.unique(idx)
    return idx


def check_alpha_beta(alpha: float, beta: float = 0.0) -> tuple[float, float]:
    alpha = float(alpha)
    beta = float(beta)
    if alpha < 0 or beta < 0:
        raise ValueError(f"alpha and beta must be nonnegative, got alpha={alpha}, beta={beta}")
    if alpha + beta >= 1:
        raise ValueError(f"alpha+beta must be < 1, got {alpha + beta}")
    return alpha, beta


def check_probability_rows(X, tol: float = 1e-6, name: str = "prediction") -> np.ndarray:
    """Check that rows look like softmax output: entries in [0, 1], rows summing to 1."""
    X = as_score_matrix(X, name=name)
    if X.min() < -tol or X.max() > 1 + tol:
        raise ValueError(f"{name} entries must lie in [0, 1]")
    sums = X.sum(axis=1)
    if np.abs(sums - 1.0).max() > tol:
        raise ValueError(f"{name} rows must sum to 1 within {tol}")
    return X


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
