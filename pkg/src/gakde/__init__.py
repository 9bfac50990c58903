"""Sparse kernel density estimation by genetic-algorithm data condensation."""

__version__ = "0.1.0"

from .density import DataSet, SparseKde, kde_eval, kde_squared_integral, kernel_eval, sparse_kde_from_chromosome
from .fitness import BandwidthSearchConfig, FitnessValue, cv_criterion, optimize_bandwidth
from .ga import GaConfig, GaResult, make_rng, run
from .metrics import condensation_stats, ise_star, lscv_baseline, mise
from .mixtures import GaussianComponent, GaussianMixture, builtin_mixture, ise_exact, ise_numeric, mixture_pdf, mixture_sample

__all__ = [
    "DataSet",
    "SparseKde",
    "kernel_eval",
    "kde_eval",
    "kde_squared_integral",
    "sparse_kde_from_chromosome",
    "BandwidthSearchConfig",
    "FitnessValue",
    "cv_criterion",
    "optimize_bandwidth",
    "GaConfig",
    "GaResult",
    "make_rng",
    "run",
    "condensation_stats",
    "ise_star",
    "mise",
    "lscv_baseline",
    "GaussianComponent",
    "GaussianMixture",
    "builtin_mixture",
    "mixture_pdf",
    "mixture_sample",
    "ise_exact",
    "ise_numeric",
]
