"""Experiment configuration files.

Format: one ``key = value`` per line, ``#`` starts a comment, blank lines are
ignored.  Keys::

    experiment   mom_vs_empirical | regress_heavy | lasso_heavy | cov_shrink | geometry_tables
    trials       positive integer (default 100)
    seed         nonnegative integer (default 0)
    n, d         sample size and dimension
    k            group count (overrides delta)
    delta        confidence parameter in (0, 1)
    lambda       ridge / shrinkage level (>= 0)
    dist         scalar distribution (mom_vs_empirical, cov_shrink factors)
    noise        noise distribution (regression experiments)
    s            sparsity (lasso_heavy)
    quantiles    comma-separated deltas for the summary, e.g. 0.1, 0.01
    out          output CSV path

Distributions use the grammar of :func:`heavytail_est.synth_data.parse_dist_spec`,
e.g. ``student_t(2.5)`` or ``pareto(3, 1, centered)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..synth_data import DistSpec, parse_dist_spec

__all__ = ["Experiment", "ExperimentConfig", "ConfigError", "parse_config", "load_config"]


class Experiment(str, enum.Enum):
    MOM_VS_EMPIRICAL = "mom_vs_empirical"
    REGRESS_HEAVY = "regress_heavy"
    LASSO_HEAVY = "lasso_heavy"
    COV_SHRINK = "cov_shrink"
    GEOMETRY_TABLES = "geometry_tables"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: Experiment
    trials: int = 100
    seed: int = 0
    n: int = 1000
    d: int = 5
    k: int | None = None
    delta: float | None = 0.01
    lam: float = 0.0
    dist: DistSpec = field(default_factory=lambda: DistSpec.student_t(2.5))
    noise: DistSpec = field(default_factory=lambda: DistSpec.student_t(2.5))
    s: int = 1
    quantiles: tuple = (0.1, 0.01, 0.001)
    out: Path = Path("results.csv")

    def __post_init__(self):
        object.__setattr__(self, "experiment", Experiment(self.experiment))
        object.__setattr__(self, "out", Path(self.out))
        problems = self.problems()
        if problems:
            raise ConfigError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if self.trials < 1:
            out.append("field trials: must be >= 1")
        if self.seed < 0:
            out.append("field seed: must be >= 0")
        if self.n < 1 or self.d < 1:
            out.append("fields n, d: must be >= 1")
        if self.k is not None and not 1 <= self.k <= self.n:
            out.append("field k: must lie in [1, n]")
        if self.delta is not None and not 0 < self.delta < 1:
            out.append("field delta: must lie in (0, 1)")
        if self.k is None and self.delta is None:
            out.append("fields k/delta: one of them is required")
        if self.lam < 0:
            out.append("field lambda: must be >= 0")
        if not 1 <= self.s <= self.d:
            out.append("field s: must lie in [1, d]")
        if not self.quantiles or any(not 0 < q < 1 for q in self.quantiles):
            out.append("field quantiles: each delta must lie in (0, 1)")
        return out

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {key: val for key, val in kw.items() if val is not None}
        if "k" in kw:
            kw.setdefault("delta", None)
        elif "delta" in kw:
            kw["k"] = None
        return replace(self, **kw)


_INT_KEYS = {"trials", "seed", "n", "d", "k", "s"}
_FLOAT_KEYS = {"delta", "lambda"}
_DIST_KEYS = {"dist", "noise"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _DIST_KEYS | {"experiment", "quantiles", "out"}


def parse_config(text: str, source: str = "<config>", base_dir: Path | None = None) -> ExperimentConfig:
    """Parse the key-value format; errors name the file and line."""
    values: dict = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        where = f"{source}:{ln}"
        if not sep or not key:
            raise ConfigError(f"{where}: expected 'key = value', got {raw.strip()!r}")
        if key not in _ALL_KEYS:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{where}: duplicate key {key!r}")
        try:
            if key in _INT_KEYS:
                values[key] = int(val)
            elif key in _FLOAT_KEYS:
                values[key] = float(val)
            elif key in _DIST_KEYS:
                values[key] = parse_dist_spec(val)
            elif key == "quantiles":
                values[key] = tuple(float(q) for q in val.split(",") if q.strip())
            elif key == "experiment":
                values[key] = Experiment(val)
            else:
                p = Path(val)
                values[key] = p if p.is_absolute() or base_dir is None else base_dir / p
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from None
    if "experiment" not in values:
        raise ConfigError(f"{source}: missing required key 'experiment'")
    if "lambda" in values:
        values["lam"] = values.pop("lambda")
    if "k" in values and "delta" not in values:
        values["delta"] = None
    try:
        return ExperimentConfig(**values)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    return parse_config(text, str(path), path.parent)

