"""Lasso under heavy-tailed noise, plus restricted-eigenvalue diagnostics.

The solver minimizes ``(1/2n)|Xw - y|^2 + lam |w|_1`` by cyclic coordinate
descent and stops on a KKT certificate.  ``heavy_tail_lasso`` fits one Lasso
per disjoint group and keeps the fit with the smallest Euclidean
majority ball.

The RE constant ``gamma(Psi, s) = min_{u in E_s} |Psi u| / |u_[s]|`` over the
cone ``E_s = {u : |u_[s]^C|_1 <= 3 |u_[s]|_1}`` is searched on a grid of
directions for the top-s block; for each grid direction the remaining
coordinates are optimized exactly (a small convex QP), so every returned value
is attained by a cone member and upper-bounds gamma.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numba
import numpy as np

from .dataset import Dataset
from .metric_select import SelectionReport, euclidean, select_median_distance_set
from .mom_scalar import partition_indices

__all__ = [
    "LassoConfig",
    "LassoNotConverged",
    "REMethod",
    "REReport",
    "lasso_fit",
    "kkt_gap",
    "soft_threshold",
    "lasso_lambda",
    "lasso_groups",
    "heavy_tail_lasso",
    "re_constant_gamma",
    "sparse_operator_norm_eta",
    "re_report",
    "lasso_oracle_bound",
    "in_restricted_cone",
    "top_s_indices",
]


class LassoNotConverged(RuntimeError):
    def __init__(self, weights: np.ndarray, gap: float, iterations: int):
        super().__init__(f"lasso did not reach the KKT tolerance after {iterations} sweeps (gap={gap!r})")
        self.weights = weights
        self.gap = gap
        self.iterations = iterations


@dataclass(frozen=True)
class LassoConfig:
    lam: float
    tol: float = 1e-9
    max_iter: int = 100_000
    k: int = 1
    seed: int | None = 0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1 or self.k < 1:
            raise ValueError("max_iter and k must be positive")


def soft_threshold(z, lam):
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


@numba.njit(cache=True)
def _kkt(w, g, lam):
    gap = 0.0
    for j in range(w.shape[0]):
        if w[j] > 0:
            v = abs(g[j] - lam)
        elif w[j] < 0:
            v = abs(g[j] + lam)
        else:
            v = max(0.0, abs(g[j]) - lam)
        if v > gap:
            gap = v
    return gap


@numba.njit(cache=True)
def _cd(G, c, lam, w, tol, max_iter):
    # g = c - G w is the negative gradient of the smooth part
    d = w.shape[0]
    g = c - G @ w
    gap = _kkt(w, g, lam)
    sweeps = 0
    while gap > tol and sweeps < max_iter:
        for j in range(d):
            gjj = G[j, j]
            if gjj <= 0.0:
                new = 0.0
            else:
                z = g[j] + gjj * w[j]
                if z > lam:
                    new = (z - lam) / gjj
                elif z < -lam:
                    new = (z + lam) / gjj
                else:
                    new = 0.0
            step = new - w[j]
            if step != 0.0:
                w[j] = new
                for l in range(d):
                    g[l] -= G[l, j] * step
        sweeps += 1
        # recompute from scratch to keep drift out of the certificate
        g = c - G @ w
        gap = _kkt(w, g, lam)
    return w, gap, sweeps


def kkt_gap(X, y, w, lam: float) -> float:
    """Largest violation of the Lasso stationarity conditions at ``w``."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    g = X.T @ (np.asarray(y, dtype=float) - X @ np.asarray(w, dtype=float)) / n
    return float(_kkt(np.asarray(w, dtype=float), g, float(lam)))


def lasso_fit(X, y, lam: float, tol: float = 1e-9, max_iter: int = 100_000, w0=None) -> np.ndarray:
    """Minimize ``(1/2n)|Xw - y|^2 + lam |w|_1``.

    Returns ``w`` with KKT gap ``<= tol``; raises :class:`LassoNotConverged`
    with the last iterate otherwise.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError("X must be n x d and y of length n")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite input")
    n, d = X.shape
    G = X.T @ X / n
    c = X.T @ y / n
    w = np.zeros(d) if w0 is None else np.array(w0, dtype=float)
    w, gap, sweeps = _cd(G, c, float(lam), w, float(tol), int(max_iter))
    if gap > tol:
        raise LassoNotConverged(w, float(gap), int(sweeps))
    return w


def lasso_lambda(sigma: float, eta: float, d: int, n_group: int) -> float:
    """Per-group level ``2 sqrt(sigma^2 eta^2 log(2d) / n_group)``."""
    if sigma <= 0 or eta <= 0 or n_group < 1:
        raise ValueError("need sigma > 0, eta > 0 and a nonempty group")
    return 2.0 * math.sqrt(sigma**2 * eta**2 * math.log(2 * d) / n_group)


def lasso_groups(delta: float, c: float = 18.0) -> int:
    """``ceil(c ln(1/delta))`` groups: a 2/3 per-group success rate then fails
    the majority vote with probability at most ``exp(-k/18)``."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return max(1, math.ceil(c * math.log(1.0 / delta)))


def heavy_tail_lasso(data: Dataset, sigma: float, eta: float, delta: float, seed=0, *,
                     k: int | None = None, tol: float = 1e-9, max_iter: int = 100_000):
    """Group-wise Lasso fits, then median-distance selection in Euclidean norm.

    Returns ``(weights, report)``.  ``k`` overrides the group count derived
    from ``delta``.
    """
    if sigma <= 0 or eta <= 0:
        raise ValueError("sigma and eta must be positive")
    k = lasso_groups(delta) if k is None else int(k)
    n, d = data.X.shape
    if n < 2 * k:
        raise ValueError(f"need n >= 2k (n={n}, k={k})")
    idx = partition_indices(n, k, seed)
    lam = lasso_lambda(sigma, eta, d, idx.shape[1])
    W = np.array([lasso_fit(data.X[g], data.y[g], lam, tol, max_iter) for g in idx])
    report = select_median_distance_set(W, euclidean)
    return W[report.selected_index].copy(), report


def lasso_oracle_bound(lam: float, s: int, gamma: float) -> float:
    """``12 lam sqrt(s) / gamma^2`` (unnormalized multiplier ``lam``)."""
    if gamma <= 0:
        raise ValueError("RE condition fails: gamma must be positive")
    return 12.0 * lam * math.sqrt(s) / gamma**2


def top_s_indices(u, s: int) -> np.ndarray:
    """Indices of the s largest |u_j|; ties go to the lower index."""
    return np.argsort(-np.abs(np.asarray(u, dtype=float)), kind="stable")[:s]


def in_restricted_cone(u, s: int, rtol: float = 0.0) -> bool:
    """Whether ``|u_[s]^C|_1 <= 3 |u_[s]|_1 (1 + rtol)``; the zero vector counts as inside."""
    u = np.abs(np.asarray(u, dtype=float))
    top = top_s_indices(u, s)
    head = u[top].sum()
    tail = u.sum() - head
    return bool(tail <= 3.0 * head * (1.0 + rtol))


# --- gamma grid search -------------------------------------------------------

@numba.njit(cache=True)
def _project_box_l1(z, c, r):
    """Euclidean projection onto {|v_i| <= c, |v|_1 <= r}."""
    m = z.shape[0]
    out = np.empty(m)
    total = 0.0
    for i in range(m):
        total += min(abs(z[i]), c)
    if total <= r:
        for i in range(m):
            out[i] = min(max(z[i], -c), c)
        return out
    lo, hi = 0.0, 0.0
    for i in range(m):
        hi = max(hi, abs(z[i]))
    for _ in range(200):
        tau = 0.5 * (lo + hi)
        s = 0.0
        for i in range(m):
            s += min(max(abs(z[i]) - tau, 0.0), c)
        if s > r:
            lo = tau
        else:
            hi = tau
        if hi - lo <= 1e-16 * (1.0 + hi):
            break
    for i in range(m):
        mag = min(max(abs(z[i]) - hi, 0.0), c)
        out[i] = mag if z[i] >= 0 else -mag
    return out


@numba.njit(cache=True)
def _cone_qp(const, b, H, lip, c, r, max_iter):
    """min over the box/l1 set of const + 2 b.v + v.H.v by FISTA; returns the
    best value seen at a feasible point."""
    m = b.shape[0]
    if m == 0 or c == 0.0 or lip == 0.0:
        # v is pinned to 0, or the objective does not depend on it
        return max(const, 0.0)
    v = np.zeros(m)
    yv = v.copy()
    t = 1.0
    best = const
    prev = const
    stall = 0
    for _ in range(max_iter):
        grad = 2.0 * (b + H @ yv)
        nv = _project_box_l1(yv - grad / lip, c, r)
        val = const + 2.0 * (b @ nv) + nv @ (H @ nv)
        if val < best:
            best = val
        nt = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        if val > prev:
            # adaptive restart keeps the iteration monotone-ish
            t, nt = 1.0, 1.0
            yv = nv.copy()
        else:
            yv = nv + ((t - 1.0) / nt) * (nv - v)
        if abs(prev - val) <= 1e-15 * (1.0 + abs(val)):
            stall += 1
            if stall > 20:
                break
        else:
            stall = 0
        v = nv
        t = nt
        prev = val
    return max(best, 0.0)


DESK_D = 6
DESK_S = 2


def _gamma_sq_for_block(Psi, J, uJ, max_iter):
    a = Psi[:, J] @ uJ
    rest = [j for j in range(Psi.shape[1]) if j not in J]
    B = Psi[:, rest]
    H = B.T @ B
    lip = 2.0 * float(np.linalg.eigvalsh(H)[-1]) if rest else 0.0
    c = float(np.min(np.abs(uJ)))
    r = 3.0 * float(np.abs(uJ).sum())
    return _cone_qp(float(a @ a), B.T @ a, H, lip, c, r, max_iter)


def re_constant_gamma(Psi, s: int, resolution: float = 0.01, *, max_iter: int = 20_000) -> float:
    """Grid-search value of ``gamma(Psi, s)`` (an upper bound on the true minimum).

    The top-s block ``u_J`` ranges over unit vectors: ``u_J = 1`` for s = 1,
    ``(cos t, sin t)`` with ``t = j * resolution`` in ``[0, pi)`` for s = 2.
    Given ``u_J`` the rest ``v`` solves ``min |Psi_J u_J + Psi_Jc v|`` subject
    to ``|v_i| <= min|u_J|`` (so J stays the top block) and the cone
    constraint.  Grids are nested, so halving ``resolution`` never increases
    the result.  For s = 2 the s = 1 search is included as well (its
    minimizers lie in E_2 with a ratio that can only shrink).
    """
    Psi = np.asarray(Psi, dtype=float)
    if Psi.ndim != 2:
        raise ValueError("Psi must be a matrix")
    d = Psi.shape[1]
    if d > DESK_D or s > DESK_S:
        raise ValueError(f"γ search supported only at desk scale (d <= {DESK_D}, s <= {DESK_S})")
    if not 1 <= s <= d:
        raise ValueError("need 1 <= s <= d")
    if not 0 < resolution <= 0.05:
        raise ValueError("resolution must lie in (0, 0.05]")
    best = math.inf
    for j in range(d):
        best = min(best, _gamma_sq_for_block(Psi, [j], np.ones(1), max_iter))
    if s == 2:
        steps = math.ceil(math.pi / resolution)
        for J in itertools.combinations(range(d), 2):
            for i in range(steps):
                t = i * resolution
                if t >= math.pi:
                    break
                uJ = np.array([math.cos(t), math.sin(t)])
                best = min(best, _gamma_sq_for_block(Psi, list(J), uJ, max_iter))
    return math.sqrt(best)


def sparse_operator_norm_eta(Psi, s: int) -> float:
    """Exact ``eta(Psi, s)``: largest singular value over all s-column submatrices."""
    Psi = np.asarray(Psi, dtype=float)
    d = Psi.shape[1]
    if d > 20 or s > 3:
        raise ValueError("eta enumeration supported only for d <= 20 and s <= 3")
    if not 1 <= s <= d:
        raise ValueError("need 1 <= s <= d")
    return max(float(np.linalg.norm(Psi[:, list(J)], 2)) for J in itertools.combinations(range(d), s))


class REMethod(str, enum.Enum):
    EXACT_SUPPORT_ENUM = "exact_support_enum"
    GRID_SEARCH = "grid_search"


@dataclass(frozen=True)
class REReport:
    gamma: float
    eta: float
    s: int
    method: REMethod
    resolution: float

    def to_text(self) -> str:
        return "".join(f"{key}={val}\n" for key, val in (
            ("gamma", repr(self.gamma)),
            ("eta", repr(self.eta)),
            ("s", self.s),
            ("method", self.method.value),
            ("resolution", repr(self.resolution)),
        ))

    @classmethod
    def from_text(cls, text: str) -> "REReport":
        fields = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ValueError(f"bad line {line!r}")
            fields[key.strip()] = val.strip()
        try:
            return cls(float(fields["gamma"]), float(fields["eta"]), int(fields["s"]),
                       REMethod(fields["method"]), float(fields["resolution"]))
        except KeyError as exc:
            raise ValueError(f"missing field {exc.args[0]!r}") from None


def re_report(Psi, s: int, resolution: float = 0.01) -> REReport:
    """gamma by grid search, eta by exact enumeration (method records the gamma side)."""
    return REReport(re_constant_gamma(Psi, s, resolution), sparse_operator_norm_eta(Psi, s), s,
                    REMethod.GRID_SEARCH, resolution)
