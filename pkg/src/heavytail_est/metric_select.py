"""Robust selection of one candidate out of k in a (pseudo)metric space.

Given a multiset ``W`` of k candidate points, most of which are close to an
unknown target, each procedure here returns a point that is provably close to
that target as well.  Candidate indices are 0-based throughout.

Procedures
----------
select_median_distance_set
    Pick the candidate whose smallest ball holding a strict majority of ``W``
    is smallest.  Within 3x of ``delta_radius(W, target, 0)``.
select_median_distance_noisy
    Same idea when distances are only available through per-candidate noisy
    oracles; radii are medians of oracle answers.
select_geometric_median_set
    Pick the candidate minimizing the sum of distances to all others.
geometric_median_euclidean
    Space-based geometric median in R^d (Weiszfeld iteration).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Iterator, Sequence

import numpy as np

__all__ = [
    "Procedure",
    "SelectionReport",
    "InvalidMetricValue",
    "GeometricMedianNotConverged",
    "lower_median",
    "euclidean",
    "distance_table",
    "majority_count",
    "delta_radius",
    "select_from_radii",
    "select_median_distance_set",
    "select_median_distance_noisy",
    "select_geometric_median_set",
    "geometric_median_euclidean",
    "weiszfeld_iterates",
    "approximation_factor",
]

Metric = Callable[[Any, Any], float]
NoisyDistanceOracle = Callable[[int, Any], float]


class Procedure(str, enum.Enum):
    MEDIAN_DISTANCE_SET = "median_distance_set"
    MEDIAN_DISTANCE_NOISY = "median_distance_noisy"
    GEOMETRIC_MEDIAN_SET = "geometric_median_set"
    GEOMETRIC_MEDIAN_SPACE = "geometric_median_space"


class InvalidMetricValue(ValueError):
    """A metric or distance oracle returned a negative or non-finite value."""


class GeometricMedianNotConverged(RuntimeError):
    def __init__(self, best: np.ndarray, objective: float, gap: float):
        super().__init__(
            f"geometric median did not converge: objective={objective!r}, "
            f"optimality gap bound={gap!r}"
        )
        self.best = best
        self.objective = objective
        self.gap = gap


@dataclass(frozen=True)
class SelectionReport:
    """Outcome of a selection procedure.

    ``radii[i]`` is the score of candidate ``i`` (a ball radius, a median of
    oracle answers, or a sum of distances, depending on ``procedure``).
    ``selected_index`` is the lowest index attaining the minimum and is always
    a member of ``tie_indices``.
    """

    selected_index: int
    radii: np.ndarray
    tie_indices: tuple[int, ...]
    procedure: Procedure

    @property
    def k(self) -> int:
        return len(self.radii)


def lower_median(values) -> float:
    """Median with the lower order statistic for even counts (always attained)."""
    arr = np.sort(np.asarray(values, dtype=float).ravel())
    if arr.size == 0:
        raise ValueError("median of an empty sequence")
    return float(arr[(arr.size - 1) // 2])


def euclidean(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


def _check_distance(value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise InvalidMetricValue(f"invalid metric value: {value!r}")
    return value


def distance_table(points: Sequence[Any], metric: Metric) -> np.ndarray:
    """Symmetric k x k table of pairwise distances.

    Each unordered pair is evaluated once (row-major over ``i <= j``) and
    mirrored, so the result does not depend on how the metric handles
    argument order.
    """
    k = len(points)
    table = np.zeros((k, k))
    for i in range(k):
        for j in range(i, k):
            d = _check_distance(metric(points[i], points[j]))
            if i == j and d != 0.0:
                raise InvalidMetricValue(f"invalid metric value: nonzero self-distance {d!r}")
            table[i, j] = table[j, i] = d
    return table


def majority_count(k: int, alpha: float = 0.0) -> int:
    """Smallest integer count strictly greater than ``k * (1/2 + alpha)``.

    ``alpha`` is snapped to the nearest simple fraction so that e.g.
    ``5/36`` typed as a float gives the exact rational threshold.
    """
    if not 0 <= alpha < 0.5:
        raise ValueError(f"alpha must lie in [0, 1/2), got {alpha!r}")
    frac = Fraction(alpha).limit_denominator(10**6)
    threshold = k * (Fraction(1, 2) + frac)
    return min(math.floor(threshold) + 1, k)


def delta_radius(W: Sequence[Any], center: Any, alpha: float, metric: Metric) -> float:
    """Smallest r such that more than ``k(1/2 + alpha)`` points of W lie in the
    closed ball of radius r around ``center``."""
    if len(W) == 0:
        raise ValueError("empty candidate set")
    dists = np.sort([_check_distance(metric(center, w)) for w in W])
    return float(dists[majority_count(len(W), alpha) - 1])


def select_from_radii(radii, procedure: Procedure) -> SelectionReport:
    radii = np.asarray(radii, dtype=float)
    best = radii.min()
    ties = tuple(int(i) for i in np.flatnonzero(radii == best))
    return SelectionReport(ties[0], radii, ties, Procedure(procedure))


def _resolve_table(W, metric, table) -> np.ndarray:
    if table is not None:
        table = np.asarray(table, dtype=float)
        if table.ndim != 2 or table.shape[0] != table.shape[1]:
            raise ValueError("distance table must be square")
        if not np.all(np.isfinite(table)) or np.any(table < 0):
            raise InvalidMetricValue("invalid metric value in distance table")
        return table
    if W is None or metric is None:
        raise TypeError("need either (W, metric) or table")
    if len(W) == 0:
        raise ValueError("empty candidate set")
    return distance_table(W, metric)


def select_median_distance_set(
    W: Sequence[Any] | None = None,
    metric: Metric | None = None,
    *,
    table: np.ndarray | None = None,
) -> SelectionReport:
    """Select the candidate with the smallest strict-majority ball.

    ``radii[i] = min{r >= 0 : |Ball(w_i, r) ∩ W| > k/2}``, counting ``w_i``
    itself.  Pass a precomputed ``table`` to skip metric evaluation.
    """
    table = _resolve_table(W, metric, table)
    k = table.shape[0]
    radii = np.sort(table, axis=1)[:, majority_count(k, 0.0) - 1]
    return select_from_radii(radii, Procedure.MEDIAN_DISTANCE_SET)


def oracle_table(W: Sequence[Any], oracle: NoisyDistanceOracle) -> np.ndarray:
    """``T[i, j] = oracle(j, W[i])``: oracle j's estimate of the distance from w_i to w_j."""
    k = len(W)
    out = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            out[i, j] = _check_distance(oracle(j, W[i]))
    return out


def select_median_distance_noisy(
    W: Sequence[Any] | None = None,
    oracle: NoisyDistanceOracle | None = None,
    *,
    table: np.ndarray | None = None,
    include_self: bool = True,
) -> SelectionReport:
    """Select by the median of noisy distance estimates.

    ``radii[i]`` is the lower median over j of ``oracle(j, W[i])``.  The
    self-term ``j == i`` is included by default; ``include_self=False`` drops
    it (the regression variant).  With a single candidate and the self-term
    excluded the radius is defined as 0.
    """
    if table is None:
        if W is None or oracle is None:
            raise TypeError("need either (W, oracle) or table")
        if len(W) == 0:
            raise ValueError("empty candidate set")
        table = oracle_table(W, oracle)
    else:
        table = np.asarray(table, dtype=float)
        if not np.all(np.isfinite(table)) or np.any(table < 0):
            raise InvalidMetricValue("invalid metric value in oracle table")
    k = table.shape[0]
    if include_self:
        ordered = np.sort(table, axis=1)
        radii = ordered[:, (k - 1) // 2]
    elif k == 1:
        radii = np.zeros(1)
    else:
        off = table[~np.eye(k, dtype=bool)].reshape(k, k - 1)
        radii = np.sort(off, axis=1)[:, (k - 2) // 2]
    return select_from_radii(radii, Procedure.MEDIAN_DISTANCE_NOISY)


def select_geometric_median_set(
    W: Sequence[Any] | None = None,
    metric: Metric | None = None,
    *,
    table: np.ndarray | None = None,
) -> SelectionReport:
    """Select the candidate minimizing ``sumd(w_i) = sum_j rho(w_i, w_j)``."""
    table = _resolve_table(W, metric, table)
    return select_from_radii(table.sum(axis=1), Procedure.GEOMETRIC_MEDIAN_SET)


def _sumd(x: np.ndarray, pts: np.ndarray) -> float:
    return float(np.linalg.norm(pts - x, axis=1).sum())


ROUNDING = 1e-14


def weiszfeld_iterates(points, max_iter: int = 10_000) -> Iterator[tuple[np.ndarray, float, float]]:
    """Yield ``(x, objective, gap_bound)`` along the Weiszfeld iteration.

    Uses the Vardi-Zhang modification at data points, so the objective is
    nonincreasing in exact arithmetic; computed values may wobble by a
    relative ``ROUNDING`` near the optimum, where the gradient certificate
    still improves.  ``gap_bound`` upper-bounds ``objective - min``: the
    minimizer lies in the convex hull of the points, hence within
    ``max_j |x - p_j|`` of any hull point, and convexity gives
    ``f(x) - f* <= |g| * max_j |x - p_j|`` for the minimal-norm subgradient g.
    A gap of exactly 0 is reported when a data point passes the exact
    optimality test.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 1 and np.ndim(points) == 1:
        pts = pts.T
    x = pts.mean(axis=0)
    fx = _sumd(x, pts)
    for _ in range(max_iter):
        diff = x - pts
        dist = np.linalg.norm(diff, axis=1)
        at = dist == 0.0
        mult = int(at.sum())
        far = ~at
        if not far.any():
            yield x, fx, 0.0
            return
        inv = 1.0 / dist[far]
        pull = (diff[far] * inv[:, None]).sum(axis=0)
        pull_norm = float(np.linalg.norm(pull))
        grad_norm = max(0.0, pull_norm - mult)
        gap = 0.0 if grad_norm == 0.0 else grad_norm * float(dist.max())
        yield x, fx, gap

        # exact optimality test at the nearest data point
        near = int(np.argmin(dist))
        p = pts[near]
        pdiff = p - pts
        pdist = np.linalg.norm(pdiff, axis=1)
        pat = pdist == 0.0
        if (~pat).any():
            ppull = (pdiff[~pat] / pdist[~pat][:, None]).sum(axis=0)
            if np.linalg.norm(ppull) <= pat.sum():
                fp = _sumd(p, pts)
                if fp <= fx:
                    yield p.copy(), fp, 0.0
                    return

        target = (pts[far] * inv[:, None]).sum(axis=0) / inv.sum()
        if mult:
            # Vardi-Zhang step: blend the Weiszfeld map with the current point
            beta = min(1.0, mult / pull_norm) if pull_norm > 0 else 1.0
            new = (1.0 - beta) * target + beta * x
        else:
            new = target
        fnew = _sumd(new, pts)
        if fnew > fx * (1.0 + ROUNDING) or np.array_equal(new, x):
            # a real increase can only come from rounding; or a fixed point
            return
        x, fx = new, fnew


def geometric_median_euclidean(points, tol: float = 1e-10, max_iter: int = 10_000) -> np.ndarray:
    """Geometric median of points in R^d.

    Returns ``x`` whose sum of Euclidean distances is within
    ``tol * (1 + sumd(x))`` of the minimum, certified by a subgradient bound.
    Raises :class:`GeometricMedianNotConverged` (carrying the best iterate)
    otherwise.  1-D input may be given as a flat sequence.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    pts = np.asarray(points, dtype=float)
    flat = pts.ndim == 1
    if flat:
        pts = pts[:, None]
    if pts.shape[0] == 0:
        raise ValueError("empty candidate set")
    best = None
    for x, fx, gap in weiszfeld_iterates(pts, max_iter=max_iter):
        best = (x, fx, gap)
        if gap <= tol * (1.0 + fx):
            return x[0] if flat else x
    x, fx, gap = best
    if gap <= tol * (1.0 + fx):
        return x[0] if flat else x
    raise GeometricMedianNotConverged(x, fx, gap)


def approximation_factor(W: Sequence[Any], w_opt: Any, selected: Any, alpha: float, metric: Metric) -> float:
    """``rho(selected, w_opt) / delta_radius(W, w_opt, alpha)``.

    0/0 gives 0; a positive distance over a zero radius gives ``inf``.
    """
    num = _check_distance(metric(selected, w_opt))
    den = delta_radius(W, w_opt, alpha, metric)
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / den
