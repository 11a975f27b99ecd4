"""Heavy-tail covariance estimation with trace-norm shrinkage.

``cov_median_select`` splits the sample, forms one second-moment matrix per
group and keeps the one with the smallest spectral-norm majority ball.
``trace_norm_shrink`` then soft-thresholds its spectrum, which is the exact
minimizer of ``(1/2)|S - A|_F^2 + lam |A|_tr`` for PSD ``S``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .heavy_regression import empirical_second_moment
from .metric_select import SelectionReport, select_median_distance_set
from .mom_scalar import partition_indices

__all__ = [
    "CovEstimate",
    "KoltReport",
    "spectral_norm",
    "spectral_distance",
    "cov_median_select",
    "trace_norm_shrink",
    "estimate_covariance",
    "shrinkage_lambda",
    "rank_truncations",
    "kolt_bound_check",
    "read_matrix_csv",
    "write_matrix_csv",
]

SYM_TOL = 1e-9


def _require_symmetric(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    scale = max(1.0, float(np.abs(M).max(initial=0.0)))
    if not np.all(np.abs(M - M.T) <= SYM_TOL * scale):
        raise ValueError("matrix is not symmetric")
    return 0.5 * (M + M.T)


def spectral_norm(M) -> float:
    """Largest absolute eigenvalue of a symmetric matrix."""
    evals = np.linalg.eigvalsh(_require_symmetric(M))
    return float(np.abs(evals).max(initial=0.0))


def spectral_distance(A, B) -> float:
    return spectral_norm(np.asarray(A, dtype=float) - np.asarray(B, dtype=float))


@dataclass(frozen=True)
class CovEstimate:
    sigma_hat: np.ndarray
    report: SelectionReport
    lam: float
    sigma_lambda: np.ndarray


def cov_median_select(samples, k: int, seed=0) -> tuple[np.ndarray, SelectionReport]:
    """Per-group second-moment matrices, selected under the spectral-norm metric."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2:
        raise ValueError("samples must be an n x d matrix")
    if not np.all(np.isfinite(samples)):
        raise ValueError("samples contain non-finite values")
    idx = partition_indices(samples.shape[0], k, seed)
    sigmas = empirical_second_moment(samples[idx])
    report = select_median_distance_set(list(sigmas), spectral_distance)
    return sigmas[report.selected_index].copy(), report


def trace_norm_shrink(sigma_hat, lam: float) -> np.ndarray:
    """``U diag(max(mu - lam, 0)) U^T`` for ``sigma_hat = U diag(mu) U^T``."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    S = _require_symmetric(sigma_hat)
    mu, U = np.linalg.eigh(S)
    scale = max(1.0, float(np.abs(mu).max(initial=0.0)))
    if mu.size and mu.min() < -SYM_TOL * scale:
        raise ValueError(f"input not PSD (smallest eigenvalue {mu.min()!r})")
    out = (U * np.maximum(mu - lam, 0.0)) @ U.T
    return 0.5 * (out + out.T)


def estimate_covariance(samples, k: int, lam: float, seed=0) -> CovEstimate:
    sigma_hat, report = cov_median_select(samples, k, seed)
    return CovEstimate(sigma_hat, report, lam, trace_norm_shrink(sigma_hat, lam))


def shrinkage_lambda(d: int, n: int, delta: float, eta: float, c: float = 1.0) -> float:
    """Rate-shaped level ``c (d log(1/delta) / n)^{1 / (2 (1 + 1/eta))}``."""
    if not 0 < delta < 1 or eta <= 0 or n < 1 or c <= 0:
        raise ValueError("need delta in (0,1), eta > 0, n >= 1, c > 0")
    return c * (d * math.log(1.0 / delta) / n) ** (1.0 / (2.0 * (1.0 + 1.0 / eta)))


def rank_truncations(sigma) -> list[np.ndarray]:
    """Best rank-r approximations (in Frobenius norm) for r = 1..d."""
    S = _require_symmetric(sigma)
    mu, U = np.linalg.eigh(S)
    order = np.argsort(-np.abs(mu), kind="stable")
    out = []
    for r in range(1, S.shape[0] + 1):
        keep = order[:r]
        out.append((U[:, keep] * mu[keep]) @ U[:, keep].T)
    return out


@dataclass(frozen=True)
class KoltReport:
    vacuous: bool
    lam: float
    estimate_error: float  # |sigma_hat - sigma|_2
    lhs: float  # (1/2)|sigma_lambda - sigma|_F^2
    margins: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ranks: tuple = ()

    @property
    def holds(self) -> bool:
        """Inequality verified for every candidate (False when vacuous)."""
        return not self.vacuous and bool(np.all(self.margins >= 0))


def kolt_bound_check(sigma_lambda, sigma_true, sigma_hat, lam: float, candidates=None,
                     rank_tol: float = 1e-10) -> KoltReport:
    """Check ``(1/2)|S_lam - S|_F^2 <= (1/2)|A - S|_F^2 + (1/2)(sqrt2 + 1)^2 lam^2 rank(A)``.

    ``margins[i]`` is right side minus left side for candidate i (default
    candidates: ``sigma_true`` and its rank-r truncations, r = 1..d).  The
    report is vacuous, with no margins, when ``lam < |sigma_hat - sigma_true|_2``.
    """
    S = _require_symmetric(sigma_true)
    SL = _require_symmetric(sigma_lambda)
    err = spectral_distance(sigma_hat, S)
    lhs = 0.5 * float(np.sum((SL - S) ** 2))
    if lam < err:
        return KoltReport(True, lam, err, lhs)
    if candidates is None:
        candidates = [S] + rank_truncations(S)
    const = 0.5 * (math.sqrt(2.0) + 1.0) ** 2 * lam**2
    margins, ranks = [], []
    for A in candidates:
        A = np.asarray(A, dtype=float)
        sv = np.linalg.svd(A, compute_uv=False)
        rank = int(np.sum(sv > rank_tol * max(1.0, sv.max(initial=0.0))))
        rhs = 0.5 * float(np.sum((A - S) ** 2)) + const * rank
        margins.append(rhs - lhs)
        ranks.append(rank)
    return KoltReport(False, lam, err, lhs, np.array(margins), tuple(ranks))


def write_matrix_csv(M, path) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in M:
            w.writerow([repr(float(v)) for v in row])


def read_matrix_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError(f"{path}: ragged rows")
    return np.array([[float(v) for v in r] for r in rows])
