"""Regression datasets and their CSV form (header ``x1,...,xd,y``)."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["Truth", "Dataset", "read_dataset_csv", "write_dataset_csv"]


@dataclass(frozen=True)
class Truth:
    """Population quantities known when data is simulated."""

    w_opt: np.ndarray
    sigma: np.ndarray
    noise_variance: float | None = None


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    truth: Truth | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim == 1:
            self.X = self.X[:, None]
        if self.X.ndim != 2 or self.X.shape[1] < 1:
            raise ValueError("X must be an n x d matrix with d >= 1")
        if self.y.shape != (self.X.shape[0],):
            raise ValueError(f"y has shape {self.y.shape}, expected ({self.X.shape[0]},)")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise ValueError("dataset contains non-finite entries")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, rows) -> "Dataset":
        return Dataset(self.X[rows], self.y[rows], self.truth)


def write_dataset_csv(data: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j + 1}" for j in range(data.d)] + ["y"])
        for row, yi in zip(data.X, data.y):
            w.writerow([repr(float(v)) for v in row] + [repr(float(yi))])


def read_dataset_csv(path) -> Dataset:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    d = len(header) - 1
    expected = [f"x{j + 1}" for j in range(d)] + ["y"]
    if d < 1 or header != expected:
        raise ValueError(f"{path}: header must be {','.join(expected) if d >= 1 else 'x1,...,xd,y'}")
    body = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float).reshape(-1, d + 1)
    return Dataset(body[:, :d], body[:, d])
