"""Median-of-means estimation of a scalar mean."""
from __future__ import annotations

import math

import numpy as np

from .metric_select import lower_median
from .synth_data import rng_from_seed

__all__ = [
    "partition_indices",
    "partition",
    "median_of_means",
    "mom_deviation_bound",
    "mom_failure_probability",
    "groups_for_confidence",
]


def partition_indices(n: int, k: int, seed=None, *, shuffle: bool = True) -> np.ndarray:
    """Row indices of k disjoint groups of size ``n // k``, as a (k, n // k) array.

    The ``n - k * (n // k)`` leftover indices after the shuffle are dropped.
    ``shuffle=False`` keeps the original order (used to pin partitions in tests).
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    if k > n:
        raise ValueError(f"more groups than samples (k={k}, n={n})")
    order = rng_from_seed(seed).permutation(n) if shuffle else np.arange(n)
    m = n // k
    return order[: k * m].reshape(k, m)


def partition(sample, k: int, seed=None, *, shuffle: bool = True) -> list[np.ndarray]:
    sample = np.asarray(sample, dtype=float)
    return [sample[idx] for idx in partition_indices(sample.shape[0], k, seed, shuffle=shuffle)]


def median_of_means(sample, k: int, seed=None, *, shuffle: bool = True) -> float:
    """Lower median of the k group means after a seeded random split."""
    sample = np.asarray(sample, dtype=float)
    if not np.all(np.isfinite(sample)):
        raise ValueError("sample contains non-finite values")
    idx = partition_indices(sample.shape[0], k, seed, shuffle=shuffle)
    return lower_median(sample[idx].mean(axis=1))


def mom_deviation_bound(sigma: float, n: int, k: int) -> float:
    """Deviation ``sigma * sqrt(6k/n)`` exceeded with probability at most ``exp(-k/4.5)``."""
    return sigma * math.sqrt(6.0 * k / n)


def mom_failure_probability(k: int) -> float:
    return math.exp(-k / 4.5)


def groups_for_confidence(delta: float, c: float = 4.5) -> int:
    """Number of groups ``ceil(c * ln(1/delta))`` for failure probability ``delta``."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return max(1, math.ceil(c * math.log(1.0 / delta)))
