"""``heavytail-est run --config <path>``: run one experiment and write its CSV.

Exit codes: 0 success, 1 invalid configuration, 2 output not writable.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import ConfigError, Experiment, load_config
from .experiments import run_experiment, thread_cap, write_csv


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heavytail-est", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--experiment", choices=[e.value for e in Experiment])
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--k", type=int)
    run.add_argument("--delta", type=float)
    run.add_argument("--lambda", dest="lam", type=float)
    run.add_argument("--n", type=int)
    run.add_argument("--d", type=int)
    run.add_argument("--out", type=Path)
    return parser


def _writable(path: Path) -> bool:
    if path.exists():
        return path.is_file() and os.access(path, os.W_OK)
    parent = path.parent if str(path.parent) else Path(".")
    return parent.is_dir() and os.access(parent, os.W_OK)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(
            experiment=args.experiment, trials=args.trials, seed=args.seed, k=args.k, delta=args.delta,
            lam=args.lam, n=args.n, d=args.d, out=args.out)
        threads = thread_cap()
    except ConfigError as exc:
        print(f"heavytail-est: invalid config: {exc}", file=sys.stderr)
        return 1
    if not _writable(cfg.out):
        print(f"heavytail-est: cannot write output {cfg.out}", file=sys.stderr)
        return 2
    try:
        result = run_experiment(cfg, threads)
    except ValueError as exc:
        print(f"heavytail-est: invalid config: {exc}", file=sys.stderr)
        return 1
    try:
        write_csv(result, cfg.out)
    except OSError as exc:
        print(f"heavytail-est: cannot write output {cfg.out}: {exc.strerror}", file=sys.stderr)
        return 2
    print(f"experiment={cfg.experiment.value} trials={cfg.trials} seed={cfg.seed} out={cfg.out}")
    for line in result.summary:
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
