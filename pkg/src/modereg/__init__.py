"""Parametric mode regression for responses bounded in (0,1)."""

from .distributions import BetaMeanDist, BetaModeDist, GbpDist
from .numerics import OptimizerOptions, RngStream
from .regression import Dataset, FitResult, ModelSpec, Params, fit

__all__ = [
    "BetaMeanDist",
    "BetaModeDist",
    "GbpDist",
    "OptimizerOptions",
    "RngStream",
    "Dataset",
    "FitResult",
    "ModelSpec",
    "Params",
    "fit",
]

__version__ = "0.1.0"
