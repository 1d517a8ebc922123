"""Pairwise mixing functions applied to the two far-end values of a triangle.

Every function is symmetric in its two arguments and positively homogeneous
of degree one, which keeps the spreading normalization well behaved under
rescaling. Entries where a function is undefined (harmonic at a + b = 0)
come back as non-finite and are zeroed by the callers, which count them.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

MixingFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def arithmetic_mean(a, b):
    return 0.5 * (np.asarray(a, dtype=np.float64) + b)


def maximum(a, b):
    return np.maximum(a, b).astype(np.float64, copy=False)


def minimum(a, b):
    return np.minimum(a, b).astype(np.float64, copy=False)


def geometric_mean(a, b):
    """Geometric mean of the absolute values, sqrt(|a|*|b|)."""
    return np.sqrt(np.abs(np.asarray(a, dtype=np.float64)) * np.abs(b))


def harmonic_mean(a, b):
    """2ab/(a+b); yields non-finite values where a + b == 0 (handled upstream)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        return 2.0 * a * b / (a + b)


MIXING_FUNCTIONS: dict[str, MixingFn] = {
    "mean": arithmetic_mean,
    "max": maximum,
    "min": minimum,
    "geom": geometric_mean,
    "harmonic": harmonic_mean,
}


def get_mixing(mixing) -> MixingFn:
    """Resolve a mixing choice given as a name or a callable."""
    if callable(mixing):
        return mixing
    try:
        return MIXING_FUNCTIONS[mixing]
    except KeyError:
        raise ValueError(
            f"unknown mixing function {mixing!r}; choose from {sorted(MIXING_FUNCTIONS)}"
        ) from None


def apply_mixing(fn: MixingFn, a: np.ndarray, b: np.ndarray, stats: dict | None = None) -> np.ndarray:
    """Apply ``fn`` entrywise, replacing undefined results with 0.

    When a ``stats`` dict is supplied, the number of replaced entries is
    accumulated under ``stats["mix_fallbacks"]``.
    """
    out = np.asarray(fn(a, b), dtype=np.float64)
    bad = ~np.isfinite(out)
    if bad.any():
        n_bad = int(bad.sum())
        out = np.where(bad, 0.0, out)
        if stats is not None:
            stats["mix_fallbacks"] = stats.get("mix_fallbacks", 0) + n_bad
    return out
