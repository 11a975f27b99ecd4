"""Seeded generators for heavy-tailed scalars and linear-model datasets.

All randomness flows through :func:`rng_from_seed`, a Philox (counter-based)
generator.  Per-trial streams come from :func:`trial_seed`, a pure function of
``(seed, trial)``, so trials can be generated in any order or in parallel.

Distribution text grammar (used by the benchmark config files)::

    gaussian                 standard normal
    gaussian(mean, sd)
    student_t(dof)
    pareto(shape)            Pareto I on [1, inf)
    pareto(shape, scale)
    pareto(shape, scale, centered)
    lognormal(mu, sigma)
    two_point(v1:p1, v2:p2, ...)
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, Truth

__all__ = [
    "DistSpec",
    "parse_dist_spec",
    "rng_from_seed",
    "trial_seed",
    "sample_scalar",
    "gen_linear_model",
    "gen_minimax_design",
]


def rng_from_seed(seed) -> np.random.Generator:
    """Philox-backed generator; a Generator passes through unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


def trial_seed(seed: int, trial: int) -> int:
    """Derived 64-bit seed for trial ``trial`` of an experiment seeded with ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(trial),))
    return int(ss.generate_state(1, np.uint64)[0])


FAMILIES = ("gaussian", "student_t", "pareto", "lognormal", "two_point")


@dataclass(frozen=True)
class DistSpec:
    family: str
    params: tuple = ()
    centered: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown distribution family {self.family!r}")
        p = self.params
        if self.family == "student_t" and not (len(p) == 1 and p[0] > 0):
            raise ValueError("student_t needs one positive dof")
        if self.family == "pareto":
            if not (len(p) == 2 and p[0] > 0 and p[1] > 0):
                raise ValueError("pareto needs shape > 0 and scale > 0")
            if self.centered and p[0] <= 1:
                raise ValueError("mean undefined: centered pareto needs shape > 1")
        if self.family == "gaussian" and not (len(p) == 2 and p[1] >= 0):
            raise ValueError("gaussian needs (mean, sd >= 0)")
        if self.family == "lognormal" and not (len(p) == 2 and p[1] >= 0):
            raise ValueError("lognormal needs (mu, sigma >= 0)")
        if self.family == "two_point":
            values, probs = p
            if len(values) != len(probs) or not values:
                raise ValueError("two_point needs matching values and probs")
            if any(q < 0 for q in probs) or not math.isclose(sum(probs), 1.0, abs_tol=1e-12):
                raise ValueError("two_point probs must be nonnegative and sum to 1")

    @classmethod
    def gaussian(cls, mean: float = 0.0, sd: float = 1.0) -> "DistSpec":
        return cls("gaussian", (float(mean), float(sd)))

    @classmethod
    def student_t(cls, dof: float) -> "DistSpec":
        return cls("student_t", (float(dof),))

    @classmethod
    def pareto(cls, shape: float, scale: float = 1.0, centered: bool = False) -> "DistSpec":
        return cls("pareto", (float(shape), float(scale)), centered)

    @classmethod
    def lognormal(cls, mu: float = 0.0, sigma: float = 1.0) -> "DistSpec":
        return cls("lognormal", (float(mu), float(sigma)))

    @classmethod
    def two_point(cls, values, probs) -> "DistSpec":
        return cls("two_point", (tuple(float(v) for v in values), tuple(float(q) for q in probs)))

    def raw_mean(self) -> float:
        f, p = self.family, self.params
        if f == "gaussian":
            return p[0]
        if f == "student_t":
            return 0.0 if p[0] > 1 else math.nan
        if f == "pareto":
            shape, scale = p
            return shape * scale / (shape - 1) if shape > 1 else math.inf
        if f == "lognormal":
            return math.exp(p[0] + p[1] ** 2 / 2)
        values, probs = p
        return float(sum(v * q for v, q in zip(values, probs)))

    def mean(self) -> float:
        return 0.0 if self.centered else self.raw_mean()

    def variance(self) -> float:
        f, p = self.family, self.params
        if f == "gaussian":
            return p[1] ** 2
        if f == "student_t":
            dof = p[0]
            if dof > 2:
                return dof / (dof - 2)
            return math.inf if dof > 1 else math.nan
        if f == "pareto":
            shape, scale = p
            if shape > 2:
                return scale**2 * shape / ((shape - 1) ** 2 * (shape - 2))
            return math.inf
        if f == "lognormal":
            mu, s = p
            return (math.exp(s**2) - 1) * math.exp(2 * mu + s**2)
        values, probs = p
        m = self.raw_mean()
        return float(sum(q * (v - m) ** 2 for v, q in zip(values, probs)))

    def with_centering(self) -> "DistSpec":
        """Zero-mean version (analytic mean subtracted); identity when already zero-mean."""
        if self.centered:
            return self
        m = self.raw_mean()
        if not math.isfinite(m):
            raise ValueError(f"mean undefined for {self}")
        if m == 0.0:
            return self
        return DistSpec(self.family, self.params, True)

    def __str__(self) -> str:
        f, p = self.family, self.params
        if f == "two_point":
            return "two_point(" + ", ".join(f"{v!r}:{q!r}" for v, q in zip(*p)) + ")"
        args = [repr(v) for v in p] + (["centered"] if self.centered else [])
        return f"{f}({', '.join(args)})"


_SPEC_RE = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def parse_dist_spec(text: str) -> DistSpec:
    m = _SPEC_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse distribution {text!r}")
    name, argtext = m.group(1), (m.group(2) or "").strip()
    args = [a.strip() for a in argtext.split(",")] if argtext else []
    try:
        if name == "two_point":
            pairs = [a.split(":") for a in args]
            if not pairs or any(len(pr) != 2 for pr in pairs):
                raise ValueError("two_point arguments are value:prob pairs")
            return DistSpec.two_point([float(v) for v, _ in pairs], [float(q) for _, q in pairs])
        centered = False
        if name == "pareto" and args and args[-1] == "centered":
            centered = True
            args = args[:-1]
        nums = [float(a) for a in args]
    except ValueError as exc:
        raise ValueError(f"bad distribution {text!r}: {exc}") from None
    builders = {
        "gaussian": DistSpec.gaussian,
        "student_t": DistSpec.student_t,
        "pareto": lambda *a: DistSpec.pareto(*a, centered=centered),
        "lognormal": DistSpec.lognormal,
    }
    if name not in builders:
        raise ValueError(f"unknown distribution family {name!r}")
    try:
        return builders[name](*nums)
    except TypeError:
        raise ValueError(f"wrong number of parameters in {text!r}") from None


def sample_scalar(spec: DistSpec, n: int, seed) -> np.ndarray:
    """``n`` i.i.d. draws from ``spec``; deterministic given ``seed``."""
    rng = rng_from_seed(seed)
    f, p = spec.family, spec.params
    if f == "gaussian":
        x = p[0] + p[1] * rng.standard_normal(n)
    elif f == "student_t":
        x = rng.standard_t(p[0], size=n)
    elif f == "pareto":
        shape, scale = p
        # inverse CDF of Pareto I; 1 - U avoids U = 0
        x = scale * (1.0 - rng.random(n)) ** (-1.0 / shape)
    elif f == "lognormal":
        x = np.exp(p[0] + p[1] * rng.standard_normal(n))
    else:
        values, probs = p
        x = np.asarray(values)[rng.choice(len(values), size=n, p=probs)]
    if spec.centered:
        x = x - spec.raw_mean()
    return np.asarray(x, dtype=float)


def _psd_factor(sigma: np.ndarray) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValueError("covariance must be square")
    if not np.allclose(sigma, sigma.T, atol=1e-12 * max(1.0, np.abs(sigma).max())):
        raise ValueError("covariance must be symmetric")
    evals, evecs = np.linalg.eigh(sigma)
    if evals.min() < -1e-9 * max(1.0, abs(evals.max())):
        raise ValueError("covariance is not PSD")
    return evecs * np.sqrt(np.clip(evals, 0.0, None))


def gen_linear_model(n: int, d: int, w_star, cov_spec="identity", noise_spec: DistSpec | None = None,
                     seed=0) -> Dataset:
    """Linear model ``y = X w* + noise`` with truth recorded.

    ``cov_spec`` is ``"identity"``, ``"orthonormal_basis"`` (rows drawn
    uniformly from the standard basis, so the second moment is ``I/d``), or
    an explicit d x d PSD matrix (Gaussian rows with that covariance).
    Noise is centered with its analytic mean.
    """
    rng = rng_from_seed(seed)
    w_star = np.asarray(w_star, dtype=float)
    if w_star.shape != (d,):
        raise ValueError(f"w_star must have length {d}")
    meta = {}
    if isinstance(cov_spec, str) and cov_spec == "identity":
        X = rng.standard_normal((n, d))
        sigma = np.eye(d)
    elif isinstance(cov_spec, str) and cov_spec == "orthonormal_basis":
        idx = rng.integers(0, d, size=n)
        X = np.zeros((n, d))
        X[np.arange(n), idx] = 1.0
        sigma = np.eye(d) / d
        meta["basis_counts"] = np.bincount(idx, minlength=d)
    elif isinstance(cov_spec, str):
        raise ValueError(f"unknown covariance spec {cov_spec!r}")
    else:
        sigma = np.asarray(cov_spec, dtype=float)
        if sigma.shape != (d, d):
            raise ValueError(f"covariance must be {d} x {d}")
        factor = _psd_factor(sigma)
        X = rng.standard_normal((n, d)) @ factor.T
    noise_spec = DistSpec.gaussian(0.0, 0.0) if noise_spec is None else noise_spec.with_centering()
    # noise drawn from its own derived stream so X does not depend on the noise family
    noise = sample_scalar(noise_spec, n, rng_from_seed(int(rng.integers(0, 2**63))))
    y = X @ w_star + noise
    var = noise_spec.variance()
    truth = Truth(w_star.copy(), sigma, var if math.isfinite(var) else None)
    return Dataset(X, y, truth, meta)


def gen_minimax_design(n: int, d: int, sigma: float, w_star, seed=0) -> Dataset:
    """Rows uniform over the standard basis of R^d, Gaussian noise of sd ``sigma``.

    ``meta["basis_counts"][i]`` is how many rows equal ``e_i``.
    """
    return gen_linear_model(n, d, w_star, "orthonormal_basis", DistSpec.gaussian(0.0, sigma), seed)
