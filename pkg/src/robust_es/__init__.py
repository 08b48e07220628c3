"""Robust effect size index for M-estimators."""

__version__ = "0.1.0"

from .convert import ConversionContext, classify_effect, convert
from .effectsize import analyze, estimate_effect_size
from .models import Dataset, fit
from .power import power_from, solve_effect_size, solve_sample_size
from .sandwich import sandwich_covariance, wald_statistic

__all__ = [
    "ConversionContext",
    "Dataset",
    "analyze",
    "classify_effect",
    "convert",
    "estimate_effect_size",
    "fit",
    "power_from",
    "sandwich_covariance",
    "solve_effect_size",
    "solve_sample_size",
    "wald_statistic",
]
