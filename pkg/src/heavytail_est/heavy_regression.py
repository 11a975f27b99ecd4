"""Least-squares and ridge regression under heavy-tailed noise.

The sample is split into k disjoint groups, one (ridge) least-squares fit is
computed per group, and a single fit is chosen by comparing candidates under
the data-dependent norms ``a -> a^T (Sigma_j + lam I) a`` built from the
groups' empirical second-moment matrices.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, Truth
from .metric_select import SelectionReport, select_median_distance_noisy
from .mom_scalar import partition_indices

__all__ = [
    "Variant",
    "RegressionConfig",
    "RegressionModel",
    "LOSS_K_CONSTANT",
    "LOSS2_K_CONSTANT",
    "fit_group_least_squares",
    "empirical_second_moment",
    "quadratic_form_table",
    "select_regression_candidate",
    "heavy_tail_regress",
    "least_squares",
    "excess_loss",
    "squared_loss",
    "chernoff_sample_size",
    "gradient_moment",
    "candidate_radius",
    "write_model_csv",
]

LOSS_K_CONSTANT = 18
LOSS2_K_CONSTANT = 45


class Variant(str, enum.Enum):
    PER_GROUP_SIGMA = "per_group"
    POOLED_SIGMA = "pooled"


@dataclass(frozen=True)
class RegressionConfig:
    """Give exactly one of ``k`` and ``delta``; ``delta`` maps to ``ceil(k_constant * ln(1/delta))``."""

    lam: float = 0.0
    k: int | None = None
    delta: float | None = None
    k_constant: float = LOSS_K_CONSTANT
    variant: Variant = Variant.PER_GROUP_SIGMA
    seed: int | None = 0

    def __post_init__(self):
        if (self.k is None) == (self.delta is None):
            raise ValueError("give exactly one of k and delta")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be positive")
        if self.delta is not None and not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not self.lam >= 0:
            raise ValueError("lam must be nonnegative")
        object.__setattr__(self, "variant", Variant(self.variant))

    @property
    def groups(self) -> int:
        if self.k is not None:
            return self.k
        return max(1, math.ceil(self.k_constant * math.log(1.0 / self.delta)))


@dataclass(frozen=True)
class RegressionModel:
    weights: np.ndarray
    report: SelectionReport
    group_weights: np.ndarray
    group_sigmas: np.ndarray  # (k, d, d), or (1, d, d) for the pooled variant

    def predict(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.weights


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite input")


def empirical_second_moment(Xg) -> np.ndarray:
    """``Xg^T Xg / m``, exactly symmetric.  Accepts a stack of groups (..., m, d)."""
    Xg = np.asarray(Xg, dtype=float)
    m = Xg.shape[-2]
    if m < 1:
        raise ValueError("need at least one row")
    S = np.swapaxes(Xg, -1, -2) @ Xg / m
    return 0.5 * (S + np.swapaxes(S, -1, -2))


def _psd_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimum-norm solution of ``A w = b`` for symmetric PSD A (stacked allowed).

    Eigenvalues below ``max_eig * d * eps`` are treated as zero.
    """
    evals, evecs = np.linalg.eigh(A)
    d = A.shape[-1]
    cutoff = evals[..., -1:] * d * np.finfo(float).eps
    inv = np.where(evals > cutoff, 1.0 / np.where(evals > cutoff, evals, 1.0), 0.0)
    coef = np.einsum("...ji,...j->...i", evecs, b) * inv
    return np.einsum("...ij,...j->...i", evecs, coef)


def fit_group_least_squares(Xg, yg, lam: float = 0.0) -> np.ndarray:
    """Minimizer of ``(1/2m)|Xg w - yg|^2 + (lam/2)|w|^2``.

    Solves ``(Sigma_g + lam I) w = Xg^T yg / m``; with ``lam == 0`` and a
    singular ``Sigma_g`` the minimum-norm solution is returned.  Stacks of
    groups with shapes (..., m, d) and (..., m) are solved in one call.
    """
    Xg = np.asarray(Xg, dtype=float)
    yg = np.asarray(yg, dtype=float)
    _check_finite(Xg, yg)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    m, d = Xg.shape[-2:]
    A = empirical_second_moment(Xg) + lam * np.eye(d)
    b = np.einsum("...mi,...m->...i", Xg, yg) / m
    w = _psd_solve(A, b)
    _check_finite(w)
    return w


def least_squares(data: Dataset, lam: float = 0.0) -> np.ndarray:
    """Plain (ridge) empirical risk minimizer on the full sample."""
    return fit_group_least_squares(data.X, data.y, lam)


def quadratic_form_table(group_weights, sigmas, lam: float = 0.0) -> np.ndarray:
    """``T[i, j] = (w_i - w_j)^T (Sigma_j + lam I)(w_i - w_j)``.

    ``sigmas`` holds one matrix per candidate, or a single pooled matrix.
    """
    W = np.asarray(group_weights, dtype=float)
    S = np.asarray(sigmas, dtype=float)
    k, d = W.shape
    if S.ndim == 2:
        S = S[None]
    A = S + lam * np.eye(d)
    diff = W[:, None, :] - W[None, :, :]  # [i, j] = w_i - w_j
    if A.shape[0] == 1:
        q = np.einsum("ijd,de,ije->ij", diff, A[0], diff)
    else:
        q = np.einsum("ijd,jde,ije->ij", diff, A, diff)
    # PSD forms; clip rounding noise
    return np.maximum(q, 0.0)


def select_regression_candidate(group_weights, sigmas, lam: float = 0.0, *,
                                include_self: bool = False) -> SelectionReport:
    """Median-of-quadratic-forms selection among fitted candidates.

    ``radii[i]`` is the lower median over ``j != i`` of the quadratic forms
    (squared distances); pass ``include_self=True`` to also count ``j == i``.
    """
    table = quadratic_form_table(group_weights, sigmas, lam)
    return select_median_distance_noisy(table=table, include_self=include_self)


def heavy_tail_regress(data: Dataset, config: RegressionConfig) -> RegressionModel:
    k = config.groups
    n, d = data.X.shape
    if k > n:
        raise ValueError(f"more groups than samples (k={k}, n={n})")
    idx = partition_indices(n, k, config.seed)
    Xg, yg = data.X[idx], data.y[idx]
    W = fit_group_least_squares(Xg, yg, config.lam)
    if config.variant is Variant.POOLED_SIGMA:
        sigmas = empirical_second_moment(data.X[idx.ravel()])[None]
    else:
        sigmas = empirical_second_moment(Xg)
    report = select_regression_candidate(W, sigmas, config.lam)
    return RegressionModel(W[report.selected_index].copy(), report, W, sigmas)


def _weights_of(model_or_weights) -> np.ndarray:
    if isinstance(model_or_weights, RegressionModel):
        return model_or_weights.weights
    return np.asarray(model_or_weights, dtype=float)


def excess_loss(model_or_weights, truth: Truth | None) -> float:
    """``L(w) - L(w*) = (1/2)(w - w*)^T Sigma (w - w*)`` for the halved squared loss."""
    if truth is None:
        raise ValueError("excess loss needs ground truth (w_opt, Sigma)")
    delta = _weights_of(model_or_weights) - truth.w_opt
    return 0.5 * float(delta @ truth.sigma @ delta)


def squared_loss(w, X, y) -> float:
    """Empirical halved squared loss ``mean((Xw - y)^2) / 2``."""
    r = np.asarray(X, dtype=float) @ np.asarray(w, dtype=float) - np.asarray(y, dtype=float)
    return 0.5 * float(np.mean(r * r))


def chernoff_sample_size(r_lambda: float, delta: float, max_iter: int = 200) -> int:
    """Smallest m (found by fixed-point iteration) with ``m >= 80 r^2 ln(4 m^2 / delta)``.

    Only a heuristic for how large groups must be for their second-moment
    matrices to be within a factor 2 of the population one.
    """
    if r_lambda <= 0 or not 0 < delta < 1:
        raise ValueError("need r_lambda > 0 and delta in (0, 1)")
    c = 80.0 * r_lambda**2
    m = max(1.0, c)
    for _ in range(max_iter):
        nxt = c * math.log(4.0 * m * m / delta)
        if abs(nxt - m) < 1e-9 * m:
            break
        m = nxt
    m = math.ceil(m)
    while m < c * math.log(4.0 * m * m / delta):
        m += 1
    return m


def gradient_moment(data: Dataset) -> float:
    """Monte Carlo estimate of ``E |Sigma^{-1/2} x (x^T w* - y)|^2`` from simulated data.

    This is the population quantity driving the per-group accuracy of the
    least-squares candidates; it needs the truth fields.
    """
    if data.truth is None:
        raise ValueError("gradient moment needs ground truth")
    resid = data.X @ data.truth.w_opt - data.y
    G = data.X * resid[:, None]
    sol = _psd_solve(data.truth.sigma, G)
    return float(np.mean(np.einsum("ni,ni->n", G, sol)))


def candidate_radius(data: Dataset, k: int, strong_convexity: float = 1.0, smoothness: float = 1.0) -> float:
    """Radius ``2 sqrt(6 gamma k E|grad|_*^2 / (n alpha^2))`` within which a single
    group's fit lands with probability >= 2/3 (norm induced by Sigma)."""
    m2 = gradient_moment(data)
    return 2.0 * math.sqrt(6.0 * smoothness * k * m2 / (data.n * strong_convexity**2))


def write_model_csv(model: RegressionModel, path) -> None:
    """One row per candidate: index, radius, selected flag, candidate weights."""
    d = model.group_weights.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "radius", "selected"] + [f"w{j + 1}" for j in range(d)])
        for i, (r, wi) in enumerate(zip(model.report.radii, model.group_weights)):
            w.writerow([i, repr(float(r)), int(i == model.report.selected_index)] + [repr(float(v)) for v in wi])
