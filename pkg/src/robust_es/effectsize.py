"""The robust effect size index and its estimator.

``S^2 = (beta - beta0)' Sigma_beta^{-1} (beta - beta0)`` is the
per-observation share of the Wald noncentrality. It is estimated by

    S_hat = sqrt(max(0, (T^2 - m) / (n - m)))

where ``m`` counts *all* estimated parameters, nuisance included.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InsufficientSampleError
from .models import Dataset, FittedModel, fit
from .sandwich import SandwichCovariance, WaldResult, sandwich_covariance, wald_statistic

__all__ = [
    "EffectSizeEstimate",
    "RobustAnalysis",
    "estimate_effect_size",
    "analyze",
    "closed_form_two_means",
    "closed_form_slr",
    "logistic_model_based_S",
]


@dataclass(frozen=True)
class EffectSizeEstimate:
    s_hat: float
    s_sq_untruncated: float
    t_squared: float
    n: int
    m: int
    m1: int
    truncated: bool


def estimate_effect_size(t_squared: float, n: int, m: int, m1: int) -> EffectSizeEstimate:
    """Truncated plug-in estimator of S from a Wald statistic.

    >>> estimate_effect_size(8.125, n=100, m=2, m1=1).s_hat
    0.25
    """
    t_squared = float(t_squared)
    if not (math.isfinite(t_squared) and t_squared >= 0):
        raise DomainError(f"T^2 must be finite and non-negative, got {t_squared!r}")
    if not 1 <= m1 <= m:
        raise DomainError(f"need 1 <= m1 <= m, got m1={m1}, m={m}")
    if n <= m:
        raise InsufficientSampleError(f"need n > m, got n={n}, m={m}")
    raw = (t_squared - m) / (n - m)
    return EffectSizeEstimate(
        s_hat=math.sqrt(max(0.0, raw)),
        s_sq_untruncated=raw,
        t_squared=t_squared,
        n=int(n),
        m=int(m),
        m1=int(m1),
        truncated=t_squared < m,
    )


@dataclass(frozen=True)
class RobustAnalysis:
    """Everything produced by one pass of fit, sandwich and estimator."""

    model: FittedModel
    covariance: SandwichCovariance
    wald: WaldResult
    estimate: EffectSizeEstimate


def analyze(data: Dataset, family: str, beta0=None, pi1_known: float | None = None) -> RobustAnalysis:
    """Fit ``family`` to ``data`` and estimate the robust index for its target block."""
    model = fit(data, family, pi1_known=pi1_known)
    cov = sandwich_covariance(model)
    wald = wald_statistic(model, cov, beta0)
    est = estimate_effect_size(wald.t_squared, model.n, model.m, model.m1)
    return RobustAnalysis(model=model, covariance=cov, wald=wald, estimate=est)


def closed_form_two_means(mu1: float, mu0: float, var1: float, var0: float, pi1: float) -> float:
    """Population index for a difference in means with unequal variances."""
    if not 0.0 < pi1 < 1.0:
        raise DomainError(f"pi1 must lie in (0, 1), got {pi1!r}")
    if not (var1 > 0 and var0 > 0):
        raise DomainError("variances must be positive")
    return math.sqrt((mu1 - mu0) ** 2 / (var1 / pi1 + var0 / (1.0 - pi1)))


def closed_form_slr(beta: float, sigma_x_sq: float, sigma_xy_sq: float) -> float:
    """Population index for simple linear regression.

    ``sigma_xy_sq`` is ``E[(X - mu_x)^2 (Y - alpha - X beta)^2]``; under
    homoskedasticity it equals ``sigma_x_sq * sigma^2``.
    """
    if not (sigma_x_sq > 0 and sigma_xy_sq > 0):
        raise DomainError("variance inputs must be positive")
    return math.sqrt(sigma_x_sq**2 * beta**2 / sigma_xy_sq)


def logistic_model_based_S(beta, i_beta) -> float:
    """``sqrt(beta' I_beta beta)`` for a correctly specified logistic model."""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    i_beta = np.atleast_2d(np.asarray(i_beta, dtype=float))
    if i_beta.shape != (beta.shape[0], beta.shape[0]):
        raise DomainError("i_beta must be square with the dimension of beta")
    if not np.allclose(i_beta, i_beta.T, rtol=1e-10, atol=0):
        raise DomainError("i_beta must be symmetric")
    try:
        np.linalg.cholesky(i_beta)
    except np.linalg.LinAlgError as exc:
        raise DomainError("i_beta must be positive definite") from exc
    return math.sqrt(max(0.0, float(beta @ i_beta @ beta)))
