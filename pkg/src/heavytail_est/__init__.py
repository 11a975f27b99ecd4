"""Robust estimation under heavy tails by selecting among subsample estimates.

Modules
-------
metric_select         robust selection of one candidate out of k (median distance, geometric median)
mom_scalar            scalar median-of-means
heavy_regression      least squares / ridge with median-of-quadratic-forms selection
sparse_lasso          Lasso, its group-wise heavy-tail variant, RE diagnostics
lowrank_cov           covariance selection in spectral norm and trace-norm shrinkage
predict_median        median aggregation of predictor outputs
adversarial_geometry  worst-case fixtures and approximation-factor tables
synth_data            seeded heavy-tailed data generators
bench                 command-line experiment harness
"""
from .dataset import Dataset, Truth
from .metric_select import SelectionReport, select_median_distance_set
from .mom_scalar import median_of_means

__version__ = "0.1.0"

__all__ = ["Dataset", "Truth", "SelectionReport", "select_median_distance_set", "median_of_means", "__version__"]
