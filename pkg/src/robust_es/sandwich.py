"""Sandwich covariance and robust Wald statistic.

Normalization convention (the usual source of sandwich bugs): psi is a
per-observation function, ``J`` and ``K`` are *means* over observations, so
``Var(theta_hat) ~= J^{-1} K J^{-1} / n`` and the Wald statistic carries an
explicit factor ``n``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import CovarianceSingularError, DomainError
from .models import FittedModel

__all__ = [
    "SandwichCovariance",
    "WaldResult",
    "sandwich_covariance",
    "wald_statistic",
    "partitioned_beta_covariance",
]

RCOND_MIN = 1e-12


def _sym(a):
    return 0.5 * (a + a.T)


# squared relative precision below which residual variance counts as zero
RESID_FLOOR = 1e-24


def _rcond_sym(a):
    ev = np.linalg.eigvalsh(a)
    top = np.max(np.abs(ev))
    if top == 0:
        return 0.0
    return ev[0] / top


@dataclass(frozen=True)
class SandwichCovariance:
    J_hat: np.ndarray
    K_hat: np.ndarray
    sigma_theta: np.ndarray
    sigma_beta: np.ndarray
    model_based_beta_cov: np.ndarray
    m0: int
    m1: int


@dataclass(frozen=True)
class WaldResult:
    t_squared: float
    df: int
    beta0: np.ndarray


def sandwich_covariance(model: FittedModel) -> SandwichCovariance:
    """Build ``J^{-1} K J^{-1}`` from a fitted model.

    ``model_based_beta_cov`` is the target block of ``dispersion * J^{-1}``,
    the covariance the working model implies when it is correctly specified.

    Raises
    ------
    CovarianceSingularError
        If ``J`` or the resulting target block is numerically singular, or
        the fit leaves no residual variation (a perfect fit).
    """
    n = model.n
    y_scale = float(np.mean(np.square(model.y)))
    if model.family != "logistic" and model.dispersion <= RESID_FLOOR * max(y_scale, np.finfo(float).tiny):
        raise CovarianceSingularError("zero residual variance; the meat matrix is singular")
    J = _sym(np.asarray(model.hessian_contrib, dtype=float))
    S = np.asarray(model.score_contrib, dtype=float)
    K = _sym(S.T @ S / n)
    if _rcond_sym(J) < RCOND_MIN:
        raise CovarianceSingularError("bread matrix J is singular")
    try:
        cf = linalg.cho_factor(J)
    except linalg.LinAlgError as exc:
        raise CovarianceSingularError("bread matrix J is not positive definite") from exc
    J_inv_K = linalg.cho_solve(cf, K)
    sigma = _sym(linalg.cho_solve(cf, J_inv_K.T))
    J_inv = _sym(linalg.cho_solve(cf, np.eye(J.shape[0])))
    b = slice(model.m0, model.m)
    sigma_beta = sigma[b, b].copy()
    if _rcond_sym(sigma_beta) < RCOND_MIN:
        raise CovarianceSingularError("robust covariance of the target block is singular")
    return SandwichCovariance(
        J_hat=J,
        K_hat=K,
        sigma_theta=sigma,
        sigma_beta=sigma_beta,
        model_based_beta_cov=model.dispersion * J_inv[b, b],
        m0=model.m0,
        m1=model.m1,
    )


def wald_statistic(model: FittedModel, cov: SandwichCovariance, beta0=None) -> WaldResult:
    """``n (beta_hat - beta0)' Sigma_beta^{-1} (beta_hat - beta0)``."""
    if beta0 is None:
        beta0 = np.zeros(model.m1)
    beta0 = np.atleast_1d(np.asarray(beta0, dtype=float))
    if beta0.shape != (model.m1,):
        raise DomainError(f"beta0 must have length {model.m1}, got {beta0.shape[0]}")
    if not np.all(np.isfinite(beta0)):
        raise DomainError("beta0 must be finite")
    diff = model.beta_hat - beta0
    try:
        cf = linalg.cho_factor(cov.sigma_beta)
    except linalg.LinAlgError as exc:
        raise CovarianceSingularError("Sigma_beta is not positive definite") from exc
    t2 = float(model.n * diff @ linalg.cho_solve(cf, diff))
    return WaldResult(t_squared=max(t2, 0.0), df=model.m1, beta0=beta0)


def partitioned_beta_covariance(design, m0, p_weights, q_weights):
    """Target-block sandwich covariance written with partitioned moment matrices.

    With ``A_kl(W) = X_k' W X_l / n`` for the nuisance (0) and target (1)
    column blocks, ``I = A11(P) - A10(P) A00(P)^-1 A01(P)`` and

        Sigma_beta = I^-1 [A10(P) A00(P)^-1 A00(Q) A00(P)^-1 A01(P)
                           - A10(P) A00(P)^-1 A01(Q)] I^-1
                     + I^-1 [A11(Q) - A10(Q) A00(P)^-1 A01(P)] I^-1.

    ``p_weights`` are the model variances (bread), ``q_weights`` the squared
    residuals (meat). Returns ``(Sigma_beta, I^-1)``.
    """
    X = np.asarray(design, dtype=float)
    n = X.shape[0]
    X0, X1 = X[:, :m0], X[:, m0:]

    def A(w, Xk, Xl):
        return (Xk * w[:, None]).T @ Xl / n

    P = np.asarray(p_weights, dtype=float)
    Q = np.asarray(q_weights, dtype=float)
    A00p, A01p, A10p, A11p = A(P, X0, X0), A(P, X0, X1), A(P, X1, X0), A(P, X1, X1)
    A00q, A01q, A10q, A11q = A(Q, X0, X0), A(Q, X0, X1), A(Q, X1, X0), A(Q, X1, X1)
    A00p_inv = np.linalg.inv(A00p)
    I_inv = np.linalg.inv(A11p - A10p @ A00p_inv @ A01p)
    first = A10p @ A00p_inv @ A00q @ A00p_inv @ A01p - A10p @ A00p_inv @ A01q
    second = A11q - A10q @ A00p_inv @ A01p
    sigma = I_inv @ first @ I_inv + I_inv @ second @ I_inv
    return _sym(sigma), _sym(I_inv)
