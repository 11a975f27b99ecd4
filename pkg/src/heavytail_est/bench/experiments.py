"""Monte Carlo experiments behind the ``heavytail-est`` CLI.

Each experiment maps a trial index to one CSV row.  A trial uses only the
generator seeded with ``trial_seed(config.seed, trial)``, so rows do not
depend on which thread ran them or in what order.
"""
from __future__ import annotations

import datetime as _dt
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from ..adversarial_geometry import table2
from ..heavy_regression import RegressionConfig, excess_loss, heavy_tail_regress, least_squares
from ..lowrank_cov import cov_median_select, kolt_bound_check, spectral_distance, trace_norm_shrink
from ..mom_scalar import groups_for_confidence, median_of_means
from ..sparse_lasso import heavy_tail_lasso, lasso_fit, lasso_lambda
from ..synth_data import DistSpec, gen_linear_model, rng_from_seed, sample_scalar, trial_seed
from .config import ConfigError, Experiment, ExperimentConfig

__all__ = ["ExperimentResult", "quantile_report", "run_experiment", "write_csv", "thread_cap", "SCHEMA"]

SCHEMA = 1


def quantile_report(values, deltas) -> list[tuple[float, float]]:
    """Empirical ``(1 - delta)``-quantiles by nearest rank ``ceil((1 - delta) m)``."""
    vals = np.sort(np.asarray(values, dtype=float).ravel())
    m = vals.size
    if m == 0:
        raise ValueError("quantile of an empty sequence")
    out = []
    for delta in deltas:
        if not 0 < delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
        # exact rational arithmetic so that e.g. 0.99 * 100 is exactly 99
        rank = math.ceil((1 - Fraction(delta).limit_denominator(10**9)) * m)
        out.append((float(delta), float(vals[max(rank, 1) - 1])))
    return out


@dataclass
class ExperimentResult:
    experiment: Experiment
    columns: list
    rows: list
    summary: list


def thread_cap(default: int | None = None) -> int:
    raw = os.environ.get("HEAVYTAIL_THREADS")
    if raw is None or raw.strip() == "":
        return default or os.cpu_count() or 1
    try:
        cap = int(raw)
    except ValueError:
        raise ConfigError(f"HEAVYTAIL_THREADS must be a positive integer, got {raw!r}") from None
    if cap < 1:
        raise ConfigError(f"HEAVYTAIL_THREADS must be a positive integer, got {raw!r}")
    return cap


def _map_trials(fn, trials: int, threads: int) -> list:
    if threads <= 1 or trials == 1:
        return [fn(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=min(threads, trials)) as pool:
        return list(pool.map(fn, range(trials)))


def _summary_lines(name: str, values, deltas) -> list[str]:
    vals = np.asarray(values, dtype=float)
    lines = [f"{name}: median={float(np.median(vals))!r}"]
    for delta, q in quantile_report(vals, deltas):
        lines.append(f"{name}: q(1-{delta!r})={q!r}")
    return lines


# --- experiments ---------------------------------------------------------------

def _mom_vs_empirical(cfg: ExperimentConfig, threads: int) -> ExperimentResult:
    mu = cfg.dist.mean()
    if not math.isfinite(mu):
        raise ConfigError(f"field dist: mean of {cfg.dist} is undefined")
    if cfg.k is not None:
        ks = {delta: cfg.k for delta in cfg.quantiles}
    else:
        ks = {delta: groups_for_confidence(delta) for delta in cfg.quantiles}
    distinct = sorted(set(ks.values()))
    for k in distinct:
        if k > cfg.n:
            raise ConfigError(f"group count {k} exceeds n={cfg.n}")

    def trial(t):
        seed = trial_seed(cfg.seed, t)
        rng = rng_from_seed(seed)
        x = sample_scalar(cfg.dist, cfg.n, rng)
        row = [t, seed, float(x.mean()), abs(float(x.mean()) - mu)]
        for k in distinct:
            est = median_of_means(x, k, rng)
            row += [est, abs(est - mu)]
        return row

    cols = ["trial", "seed", "empirical_mean", "err_empirical"]
    for k in distinct:
        cols += [f"mom_k{k}", f"err_mom_k{k}"]
    rows = _map_trials(trial, cfg.trials, threads)
    arr = np.array([r[2:] for r in rows], dtype=float)
    summary = []
    for delta in cfg.quantiles:
        k = ks[delta]
        j = distinct.index(k)
        (_, q_emp), = quantile_report(arr[:, 1], [delta])
        (_, q_mom), = quantile_report(arr[:, 3 + 2 * j], [delta])
        ratio = q_emp / q_mom if q_mom > 0 else (math.nan if q_emp == 0 else math.inf)
        summary.append(f"delta={delta!r} k={k} q_empirical={q_emp!r} q_mom={q_mom!r} ratio={ratio!r}")
    return ExperimentResult(cfg.experiment, cols, rows, summary)


def _regression_k(cfg: ExperimentConfig) -> RegressionConfig:
    if cfg.k is not None:
        return RegressionConfig(lam=cfg.lam, k=cfg.k)
    return RegressionConfig(lam=cfg.lam, delta=cfg.delta)


def _regress_heavy(cfg: ExperimentConfig, threads: int) -> ExperimentResult:
    base = _regression_k(cfg)
    k = base.groups
    if k > cfg.n:
        raise ConfigError(f"group count {k} exceeds n={cfg.n}")
    w_star = np.ones(cfg.d)

    def trial(t):
        seed = trial_seed(cfg.seed, t)
        rng = rng_from_seed(seed)
        data = gen_linear_model(cfg.n, cfg.d, w_star, "identity", cfg.noise, rng)
        model = heavy_tail_regress(data, RegressionConfig(lam=cfg.lam, k=k, seed=rng))
        erm = least_squares(data, cfg.lam)
        return [t, seed, k, model.report.selected_index, excess_loss(model, data.truth),
                excess_loss(erm, data.truth)]

    rows = _map_trials(trial, cfg.trials, threads)
    cols = ["trial", "seed", "k", "selected", "excess_alg", "excess_erm"]
    arr = np.array([r[4:] for r in rows], dtype=float)
    summary = _summary_lines("excess_alg", arr[:, 0], cfg.quantiles) + _summary_lines(
        "excess_erm", arr[:, 1], cfg.quantiles)
    return ExperimentResult(cfg.experiment, cols, rows, summary)


def _noise_sd(spec: DistSpec) -> float:
    var = spec.variance()
    if not (math.isfinite(var) and var > 0):
        raise ConfigError(f"field noise: {spec} needs a finite positive variance")
    return math.sqrt(var)


def _lasso_heavy(cfg: ExperimentConfig, threads: int) -> ExperimentResult:
    sigma = _noise_sd(cfg.noise)
    w_star = np.zeros(cfg.d)
    w_star[: cfg.s] = 1.0
    delta = cfg.delta if cfg.delta is not None else 0.05
    eta = 1.0  # identity design

    def trial(t):
        seed = trial_seed(cfg.seed, t)
        rng = rng_from_seed(seed)
        data = gen_linear_model(cfg.n, cfg.d, w_star, "identity", cfg.noise, rng)
        w, report = heavy_tail_lasso(data, sigma, eta, delta, rng, k=cfg.k)
        full = lasso_fit(data.X, data.y, lasso_lambda(sigma, eta, cfg.d, cfg.n))
        return [t, seed, report.k, report.selected_index, float(np.linalg.norm(w - w_star)),
                float(np.linalg.norm(full - w_star))]

    rows = _map_trials(trial, cfg.trials, threads)
    cols = ["trial", "seed", "k", "selected", "l2_err_alg", "l2_err_lasso"]
    arr = np.array([r[4:] for r in rows], dtype=float)
    summary = _summary_lines("l2_err_alg", arr[:, 0], cfg.quantiles) + _summary_lines(
        "l2_err_lasso", arr[:, 1], cfg.quantiles)
    return ExperimentResult(cfg.experiment, cols, rows, summary)


def _cov_shrink(cfg: ExperimentConfig, threads: int) -> ExperimentResult:
    spec = cfg.dist
    var = spec.variance()
    if not (math.isfinite(var) and var > 0):
        raise ConfigError(f"field dist: {spec} needs a finite positive variance")
    spec = spec.with_centering()
    scale = 1.0 / math.sqrt(var)
    sigma = np.diag(0.5 ** np.arange(cfg.d))
    root = np.sqrt(sigma)
    k = cfg.k if cfg.k is not None else groups_for_confidence(cfg.delta, 18.0)
    if k > cfg.n:
        raise ConfigError(f"group count {k} exceeds n={cfg.n}")

    def trial(t):
        seed = trial_seed(cfg.seed, t)
        rng = rng_from_seed(seed)
        Z = sample_scalar(spec, cfg.n * cfg.d, rng).reshape(cfg.n, cfg.d) * scale
        X = Z @ root
        s_hat, report = cov_median_select(X, k, rng)
        full = X.T @ X / cfg.n
        s_lam = trace_norm_shrink(s_hat, cfg.lam)
        rep = kolt_bound_check(s_lam, sigma, s_hat, cfg.lam)
        margin = float(rep.margins.min()) if not rep.vacuous else math.nan
        return [t, seed, k, report.selected_index, spectral_distance(s_hat, sigma),
                spectral_distance(0.5 * (full + full.T), sigma), float(np.linalg.norm(s_lam - sigma)),
                int(rep.vacuous), margin]

    rows = _map_trials(trial, cfg.trials, threads)
    cols = ["trial", "seed", "k", "selected", "spec_err_mom", "spec_err_full", "frob_err_shrunk",
            "kolt_vacuous", "kolt_min_margin"]
    arr = np.array([r[4:] for r in rows], dtype=float)
    summary = _summary_lines("spec_err_mom", arr[:, 0], cfg.quantiles) + _summary_lines(
        "spec_err_full", arr[:, 1], cfg.quantiles)
    checked = arr[arr[:, 3] == 0, 4]
    summary.append(f"kolt: checked={checked.size} violations={int(np.sum(checked < 0))}")
    return ExperimentResult(cfg.experiment, cols, rows, summary)


def _geometry_tables(cfg: ExperimentConfig, threads: int) -> ExperimentResult:
    values = table2()
    rows = [[name, values[name]] for name in sorted(values)]
    summary = [f"{name}: {val:.4f}" for name, val in rows]
    return ExperimentResult(cfg.experiment, ["cell", "normalized_factor"], rows, summary)


_RUNNERS = {
    Experiment.MOM_VS_EMPIRICAL: _mom_vs_empirical,
    Experiment.REGRESS_HEAVY: _regress_heavy,
    Experiment.LASSO_HEAVY: _lasso_heavy,
    Experiment.COV_SHRINK: _cov_shrink,
    Experiment.GEOMETRY_TABLES: _geometry_tables,
}


def run_experiment(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentResult:
    threads = thread_cap() if threads is None else threads
    res = _RUNNERS[cfg.experiment](cfg, threads)
    res.rows.sort(key=lambda r: r[0] if isinstance(r[0], int) else 0)
    return res


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(result: ExperimentResult, path, generated: str | None = None) -> None:
    """First line is a ``#`` header with schema and timestamp; the rest is deterministic."""
    generated = generated or _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    lines = [f"# heavytail-est schema={SCHEMA} experiment={result.experiment.value} generated={generated}",
             ",".join(result.columns)]
    lines += [",".join(_fmt(v) for v in row) for row in result.rows]
    Path(path).write_text("\n".join(lines) + "\n")
