"""Aggregating k predictors by the median of their outputs."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "PredictorEnsemble",
    "median_prediction",
    "median_predictions",
    "aggregate_risk_bound",
    "squared_link",
    "absolute_link",
    "mean_loss",
]

Predictor = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class PredictorEnsemble:
    """k predictors; ``gamma`` is the margin with which good ones form a majority."""

    predictors: Sequence[Predictor]
    gamma: float = 0.5

    def __post_init__(self):
        if len(self.predictors) < 1:
            raise ValueError("ensemble needs at least one predictor")
        if not 0 < self.gamma <= 0.5:
            raise ValueError("gamma must lie in (0, 1/2]")

    @property
    def k(self) -> int:
        return len(self.predictors)


def _lower_median_rows(P: np.ndarray) -> np.ndarray:
    k = P.shape[0]
    return np.sort(P, axis=0)[(k - 1) // 2]


def median_prediction(ensemble: PredictorEnsemble, x) -> float:
    """Lower median of the k predictions at ``x``."""
    preds = np.array([float(f(x)) for f in ensemble.predictors])
    if not np.all(np.isfinite(preds)):
        raise ValueError("non-finite prediction")
    return float(_lower_median_rows(preds[:, None])[0])


def median_predictions(ensemble: PredictorEnsemble, X) -> np.ndarray:
    """Vectorized form: each predictor maps an (m, d) array to m outputs."""
    X = np.asarray(X, dtype=float)
    P = np.array([np.asarray(f(X), dtype=float).reshape(-1) for f in ensemble.predictors])
    if not np.all(np.isfinite(P)):
        raise ValueError("non-finite prediction")
    return _lower_median_rows(P)


def aggregate_risk_bound(gamma: float, ell_bar: float) -> float:
    """``(1/(2 gamma) + 1) * ell_bar``."""
    if not 0 < gamma <= 0.5:
        raise ValueError("gamma must lie in (0, 1/2]")
    if ell_bar < 0:
        raise ValueError("ell_bar must be nonnegative")
    return (1.0 / (2.0 * gamma) + 1.0) * ell_bar


def squared_link(p, y):
    return (np.asarray(p, dtype=float) - np.asarray(y, dtype=float)) ** 2


def absolute_link(p, y):
    return np.abs(np.asarray(p, dtype=float) - np.asarray(y, dtype=float))


def mean_loss(predictions, y, link=squared_link) -> tuple[float, float]:
    """Empirical mean loss and its standard error."""
    losses = np.asarray(link(predictions, y), dtype=float)
    if np.any(losses < 0):
        raise ValueError("link must be nonnegative")
    m = losses.size
    se = float(losses.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    return float(losses.mean()), se
