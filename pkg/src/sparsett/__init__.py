"""Sparse estimation of travel-time densities with Gamma and Mittag-Leffler mixtures."""

from .dictionary import (
    Dictionary,
    DictionaryConfig,
    TimeGrid,
    build_gamma_dictionary,
    build_ml_dictionary,
)
from .parzen import KernelSpec, build_kernel_matrix, parzen_batch, silverman_bandwidth
from .pipeline import FitConfig, FitResult, fit_pmf, fit_samples
from .postprocess import MixtureModel, repair_unity
from .regularization import SweepConfig, sweep
from .solver import LassoProblem, SolverOptions, solve
from .streaming import StreamConfig, StreamEstimator

__version__ = "0.1.0"

__all__ = [
    "Dictionary",
    "DictionaryConfig",
    "TimeGrid",
    "build_gamma_dictionary",
    "build_ml_dictionary",
    "KernelSpec",
    "build_kernel_matrix",
    "parzen_batch",
    "silverman_bandwidth",
    "FitConfig",
    "FitResult",
    "fit_pmf",
    "fit_samples",
    "MixtureModel",
    "repair_unity",
    "SweepConfig",
    "sweep",
    "LassoProblem",
    "SolverOptions",
    "solve",
    "StreamConfig",
    "StreamEstimator",
]
