"""Adversarial fixtures for robust selection procedures.

Finite (pseudo)metric spaces on which a selection rule is forced into its
worst case, the regular-simplex geometry used for Hilbert and l_p lower
bounds, and evaluators for the approximation-factor tables.

Conventions: a :class:`FiniteMetric` stores a full distance table over named
points plus the candidate multiset ``W`` as label multiplicities.  Majority
radii use the strict definition (more than ``k(1/2 + alpha)`` candidates).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .metric_select import majority_count

__all__ = [
    "FiniteMetric",
    "MetricReport",
    "verify_metric",
    "lb_group_count",
    "build_setbased_lb_fixture",
    "build_spacebased_lb_fixture",
    "build_geomedian_lb_fixture",
    "geomedian_set_boundary",
    "geomedian_space_boundary",
    "build_meddist_tightness_fixture",
    "build_meddist_space_tightness_fixture",
    "simplex_inradius",
    "simplex_center",
    "build_hilbert_simplex_fixture",
    "write_distance_table",
    "read_distance_table",
    "write_finite_metric",
    "read_finite_metric",
    "table1",
    "normalized_factor",
    "table2",
]


@dataclass(frozen=True)
class MetricReport:
    valid: bool
    worst_violation: float  # max over triples of d(a,c) - d(a,b) - d(b,c); <= 0 for a metric
    worst_triple: tuple | None
    symmetric: bool
    zero_diagonal: bool
    nonnegative: bool


def verify_metric(table, atol: float = 1e-9) -> MetricReport:
    """Exhaustive triangle-inequality check over all ordered triples.

    ``worst_triple = (a, b, c)`` maximizes ``d(a,c) - d(a,b) - d(b,c)``
    (first in row-major order on ties); it is reported even for valid tables.
    """
    T = np.asarray(table, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError("distance table must be square")
    k = T.shape[0]
    symmetric = bool(np.all(np.abs(T - T.T) <= atol))
    zero_diag = bool(np.all(np.abs(np.diag(T)) <= atol))
    nonneg = bool(np.all(T >= -atol))
    if k == 0:
        return MetricReport(True, 0.0, None, True, True, True)
    # viol[a, b, c] = T[a, c] - T[a, b] - T[b, c]
    viol = T[:, None, :] - T[:, :, None] - T[None, :, :]
    flat = int(np.argmax(viol))
    worst = float(viol.flat[flat])
    triple = tuple(int(i) for i in np.unravel_index(flat, viol.shape))
    valid = worst <= atol and symmetric and zero_diag and nonneg
    return MetricReport(valid, worst, triple, symmetric, zero_diag, nonneg)


@dataclass
class FiniteMetric:
    labels: list
    dist: np.ndarray
    w_opt_candidates: list
    W_assignment: dict = field(default_factory=dict)

    def __post_init__(self):
        self.labels = list(self.labels)
        self.dist = np.asarray(self.dist, dtype=float)
        n = len(self.labels)
        if len(set(self.labels)) != n:
            raise ValueError("labels must be distinct")
        if self.dist.shape != (n, n):
            raise ValueError("distance table does not match labels")
        unknown = (set(self.w_opt_candidates) | set(self.W_assignment)) - set(self.labels)
        if unknown:
            raise ValueError(f"unknown labels {sorted(map(str, unknown))}")
        if any(m < 0 for m in self.W_assignment.values()):
            raise ValueError("multiplicities must be nonnegative")

    @property
    def k(self) -> int:
        return int(sum(self.W_assignment.values()))

    def index(self, label) -> int:
        return self.labels.index(label)

    def d(self, a, b) -> float:
        return float(self.dist[self.index(a), self.index(b)])

    def metric(self, i: int, j: int) -> float:
        """Metric on point indices, usable with the selection procedures."""
        return float(self.dist[i, j])

    def candidates(self) -> list[int]:
        """Candidate multiset ``W`` as point indices, in label order."""
        out = []
        for lab in self.labels:
            out.extend([self.index(lab)] * self.W_assignment.get(lab, 0))
        return out

    def delta_radius(self, center, alpha: float) -> float:
        """Smallest r with more than ``k(1/2 + alpha)`` candidates within r of ``center``."""
        c = self.index(center)
        dists = np.sort(self.dist[c, self.candidates()])
        return float(dists[majority_count(self.k, alpha) - 1])

    def sumd(self, label) -> float:
        return float(self.dist[self.index(label), self.candidates()].sum())

    def verify(self, atol: float = 1e-9) -> MetricReport:
        return verify_metric(self.dist, atol)


def lb_group_count(alpha: float) -> int:
    """Number n of (a_i, b_i) pairs: the smallest integer strictly above ``1/(1/2 - alpha)``.

    Strictness keeps ``alpha < 1/2 - 1/n``, which the strict majority radius
    needs for ``Delta_W(a_i, alpha) = 1``.  This agrees with
    ``ceil(1/(1/2 - alpha))`` unless that quotient is an integer.
    """
    if not 0 < alpha < 0.5:
        raise ValueError(f"alpha must lie in (0, 1/2), got {alpha!r}")
    q = 1 / (Fraction(1, 2) - Fraction(alpha).limit_denominator(10**6))
    return max(3, math.floor(q) + 1)


def _pair_fixture(n: int, d_aa: float, d_ab: float, d_bb: float, d_aibi: float) -> FiniteMetric:
    labels = [f"a{i + 1}" for i in range(n)] + [f"b{i + 1}" for i in range(n)]
    D = np.zeros((2 * n, 2 * n))
    for i in range(n):
        for j in range(n):
            if i != j:
                D[i, j] = d_aa
                D[n + i, n + j] = d_bb
                D[i, n + j] = D[n + j, i] = d_ab
        D[i, n + i] = D[n + i, i] = d_aibi
    # k is the smallest multiple of n that is >= 2n
    per = 2
    fm = FiniteMetric(labels, D, labels[:n], {f"b{i + 1}": per for i in range(n)})
    return fm


def build_setbased_lb_fixture(alpha: float, n: int | None = None) -> FiniteMetric:
    """Points a_1..a_n, b_1..b_n; d(a_i,a_j) = d(b_i,b_j) = 2, d(a_i,b_j) = 1, d(a_i,b_i) = 3.

    Two candidates sit at each b_i.  Every a_i is a possible target with
    majority radius 1, yet each b_i is at distance 3 from a_i.
    """
    n = lb_group_count(alpha) if n is None else n
    if n < 3:
        raise ValueError("need n >= 3")
    return _pair_fixture(n, 2.0, 1.0, 2.0, 3.0)


def build_spacebased_lb_fixture(alpha: float, n: int | None = None) -> FiniteMetric:
    """Same layout with d(b_i,b_j) = 1 and d(a_i,b_i) = 2: every point is at
    distance 2 from some a_i."""
    n = lb_group_count(alpha) if n is None else n
    if n < 3:
        raise ValueError("need n >= 3")
    return _pair_fixture(n, 2.0, 1.0, 1.0, 2.0)


def geomedian_set_boundary(alpha: float, k: int, epsilon: float = 1.0) -> float:
    """Largest beta with ``sumd(y) <= sumd(v)`` on the geometric-median fixture.

    ``sumd(y) - sumd(v) = 2 k alpha (beta - eps) - 2 (n - 1) eps`` with
    ``n = k(1/2 + alpha)``, which vanishes at ``(2 + 1/(2 alpha) - 1/(k alpha)) eps``.
    """
    return (2.0 + 1.0 / (2.0 * alpha) - 1.0 / (k * alpha)) * epsilon


def geomedian_space_boundary(alpha: float, epsilon: float = 1.0) -> float:
    """Largest beta with ``sumd(w_opt) >= sumd(y)``: ``(1 + 1/(2 alpha)) eps``."""
    return (1.0 + 1.0 / (2.0 * alpha)) * epsilon


def build_geomedian_lb_fixture(alpha: float, k: int, beta: float, epsilon: float = 1.0) -> FiniteMetric:
    """Pseudometric on w_opt, v_1..v_n, y_1..y_{k-n} with n = k(1/2 + alpha).

    d(w,v) = eps, d(w,y) = beta, d(v_i,v_j) = 2 eps, d(v,y) = beta - eps and
    the y points coincide.  One candidate sits at each v_i and y_l.  The
    triangle inequality needs ``beta >= 2 eps``.
    """
    if not 0 < alpha < 0.5:
        raise ValueError(f"alpha must lie in (0, 1/2), got {alpha!r}")
    frac = Fraction(alpha).limit_denominator(10**6)
    n_exact = k * (Fraction(1, 2) + frac)
    if n_exact.denominator != 1:
        step = (Fraction(1, 2) + frac).denominator
        raise ValueError(f"k(1/2 + alpha) must be an integer; try k = {step * max(1, -(-k // step))}")
    n = int(n_exact)
    if n >= k:
        raise ValueError("need at least one y point")
    m = k - n
    labels = ["w_opt"] + [f"v{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(m)]
    size = 1 + n + m
    D = np.zeros((size, size))
    V = range(1, 1 + n)
    Y = range(1 + n, size)
    for i in V:
        D[0, i] = D[i, 0] = epsilon
        for j in V:
            if i != j:
                D[i, j] = 2.0 * epsilon
        for t in Y:
            D[i, t] = D[t, i] = beta - epsilon
    for t in Y:
        D[0, t] = D[t, 0] = beta
    assignment = {lab: 1 for lab in labels[1:]}
    return FiniteMetric(labels, D, ["w_opt"], assignment)


def build_meddist_tightness_fixture(k: int, epsilon: float = 1.0):
    """Real-line candidates with a selection at distance 3 eps from ``w_opt = eps``.

    ``k/2 - 1`` points at 0, two at ``2 eps``, ``k/2 - 1`` at ``4 eps``; every
    candidate has the same majority radius ``2 eps``.  Returns ``(W, w_opt)``.
    """
    if k < 4 or k % 2:
        raise ValueError("k must be even and >= 4")
    h = k // 2 - 1
    W = np.array([0.0] * h + [2.0 * epsilon] * 2 + [4.0 * epsilon] * h)
    return W, epsilon


def build_meddist_space_tightness_fixture(k: int, epsilon: float = 1.0):
    """Two points at 0, ``k/2 - 1`` at ``2 eps``, ``k/2 - 1`` at ``3 eps``; ``w_opt = eps``."""
    if k < 4 or k % 2:
        raise ValueError("k must be even and >= 4")
    h = k // 2 - 1
    W = np.array([0.0] * 2 + [2.0 * epsilon] * h + [3.0 * epsilon] * h)
    return W, epsilon


def _check_np(n, p):
    if n < 2:
        raise ValueError("need n >= 2")
    if not p > 1:
        raise ValueError("need p > 1")


def simplex_center(n: int, p: float) -> float:
    """Coordinate a of the center (a, ..., a) of the smallest l_p ball holding e_1..e_n."""
    _check_np(n, p)
    return 1.0 / (1.0 + (n - 1) ** (1.0 / (p - 1.0)))


def simplex_inradius(n: int, p: float) -> float:
    """Radius of the smallest l_p ball containing the standard basis of R^n."""
    _check_np(n, p)
    q = 1.0 / (p - 1.0)
    val = (1.0 + (n - 1) ** (-q)) ** (-p) + (n - 1) * (1.0 + (n - 1) ** q) ** (-p)
    return val ** (1.0 / p)


def build_hilbert_simplex_fixture(n: int):
    """Vertices ``e_i`` (rows of I_n) and opposite face centers ``b_i``
    (0 at coordinate i, ``1/(n-1)`` elsewhere)."""
    if n < 3:
        raise ValueError("need n >= 3")
    E = np.eye(n)
    B = (1.0 - np.eye(n)) / (n - 1)
    return E, B


# --- serialization -------------------------------------------------------------

def write_distance_table(table, path) -> None:
    """Text form: first line ``n``, then n lines of n space-separated distances."""
    T = np.asarray(table, dtype=float)
    lines = [str(T.shape[0])] + [" ".join(repr(float(v)) for v in row) for row in T]
    Path(path).write_text("\n".join(lines) + "\n")


def read_distance_table(path, atol: float = 1e-9) -> np.ndarray:
    """Load a table written by :func:`write_distance_table`; rejects non-metrics."""
    path = Path(path)
    lines = [ln.split() for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty table")
    try:
        if len(lines[0]) != 1:
            raise ValueError
        n = int(lines[0][0])
        rows = [[float(v) for v in row] for row in lines[1:]]
    except ValueError:
        raise ValueError(f"{path}: malformed distance table") from None
    if len(rows) != n or any(len(r) != n for r in rows):
        raise ValueError(f"{path}: expected {n} rows of {n} distances")
    T = np.array(rows, dtype=float).reshape(n, n)
    rep = verify_metric(T, atol)
    if not rep.symmetric:
        raise ValueError(f"{path}: table is not symmetric")
    if not rep.valid:
        raise ValueError(f"{path}: triangle inequality fails at {rep.worst_triple} by {rep.worst_violation!r}")
    return T


def write_finite_metric(fm: FiniteMetric, path) -> Path:
    """Write the distance table plus a ``.sidecar`` key-value file holding the
    labels, ``W_assignment`` and ``w_opt_candidates``; returns the sidecar path."""
    path = Path(path)
    write_distance_table(fm.dist, path)
    side = path.with_name(path.name + ".sidecar")
    lines = ["labels=" + ",".join(map(str, fm.labels)),
             "w_opt_candidates=" + ",".join(map(str, fm.w_opt_candidates))]
    lines += [f"W.{lab}={fm.W_assignment[lab]}" for lab in fm.labels if lab in fm.W_assignment]
    side.write_text("\n".join(lines) + "\n")
    return side


def read_finite_metric(path) -> FiniteMetric:
    path = Path(path)
    D = read_distance_table(path)
    side = path.with_name(path.name + ".sidecar")
    labels, cands, assign = None, [], {}
    for ln, line in enumerate(side.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ValueError(f"{side}:{ln}: expected key=value")
        if key == "labels":
            labels = [v for v in val.split(",") if v]
        elif key == "w_opt_candidates":
            cands = [v for v in val.split(",") if v]
        elif key.startswith("W."):
            assign[key[2:]] = int(val)
        else:
            raise ValueError(f"{side}:{ln}: unknown key {key!r}")
    if labels is None:
        labels = [str(i) for i in range(D.shape[0])]
    return FiniteMetric(labels, D, cands, assign)


# --- approximation-factor tables ----------------------------------------------

def _n_of(alpha: float) -> int:
    if not 0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 1/2)")
    return math.ceil(1.0 / (0.5 - alpha) - 1e-12)


def table1() -> dict[str, Callable[[float], float]]:
    """``C_alpha`` for each (procedure, space) cell with a formula."""
    return {
        "set.optimal.general": lambda a: 3.0,
        "set.median_distance": lambda a: 3.0,
        "set.optimal.hilbert_lower": lambda a: math.sqrt(1.0 + 2.0 / (_n_of(a) - 2)),
        "set.geometric_median.general": lambda a: 2.0 + 1.0 / (2.0 * a),
        "space.optimal.general": lambda a: 2.0,
        "space.median_distance": lambda a: 2.0,
        "space.optimal.hilbert_lower": lambda a: math.sqrt(1.0 + 1.0 / (_n_of(a) ** 2 - 2 * _n_of(a))),
        "space.geometric_median.general": lambda a: 1.0 + 1.0 / (2.0 * a),
        "space.geometric_median.hilbert": lambda a: (0.5 + a) / math.sqrt(2.0 * a),
    }


def normalized_factor(c_alpha: Callable[[float], float], alpha: float) -> float:
    return c_alpha(alpha) / (0.5 - alpha)


def _minimize_smooth(f) -> float:
    res = minimize_scalar(f, bounds=(1e-9, 0.5 - 1e-9), method="bounded", options={"xatol": 1e-12})
    return float(res.fun)


def table2() -> dict[str, float]:
    """Infimum over alpha of ``C_alpha / (1/2 - alpha)`` per cell.

    The Hilbert lower bounds depend on alpha only through
    ``n = ceil(1/(1/2 - alpha))``; on each piece ``1/(1/2 - alpha)`` ranges
    over ``(n - 1, n]`` so the infimum is ``(n - 1) C(n)``, minimized over n.
    """
    t1 = table1()
    out = {}
    for key in ("set.optimal.general", "set.median_distance", "space.optimal.general", "space.median_distance"):
        # constant C: the infimum 2C is approached as alpha -> 0
        out[key] = _minimize_smooth(lambda a, f=t1[key]: normalized_factor(f, a))
    for key in ("set.geometric_median.general", "space.geometric_median.general",
                "space.geometric_median.hilbert"):
        out[key] = _minimize_smooth(lambda a, f=t1[key]: normalized_factor(f, a))
    out["set.optimal.hilbert_lower"] = min((n - 1) * math.sqrt(n / (n - 2)) for n in range(3, 1000))
    out["space.optimal.hilbert_lower"] = min((n - 1) ** 2 / math.sqrt(n * (n - 2)) for n in range(3, 1000))
    return out
