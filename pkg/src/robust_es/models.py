"""Estimating-equation families: two means, linear and logistic regression.

Every fit returns a :class:`FittedModel` holding the per-observation score
contributions (``n x m``) and the mean negative Hessian (``m x m``), which is
all the sandwich estimator needs. Parameters are ordered ``(alpha, beta)``:
nuisance first (intercept included for the regression families), target last.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import (
    DegenerateDesignError,
    DomainError,
    InsufficientSampleError,
    SeparationError,
    SingularDesignError,
)

__all__ = [
    "FAMILIES",
    "Dataset",
    "FittedModel",
    "fit",
    "fit_two_means",
    "fit_linear",
    "fit_logistic",
]

FAMILIES = ("two_means", "linear", "logistic")

RCOND_MIN = 1e-12
NEWTON_TOL = 1e-10
STEP_TOL = 1e-6
NEWTON_MAXITER = 100
MAX_HALVINGS = 20
MAX_LINEAR_PREDICTOR = 30.0


def _as_matrix(a, n):
    if a is None:
        return np.zeros((n, 0))
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    return a


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Scalar outcome with nuisance and target covariate blocks.

    ``x_nuisance`` excludes the intercept; the regression families add it.
    """

    y: np.ndarray
    x_target: np.ndarray
    x_nuisance: np.ndarray | None = None
    target_names: tuple[str, ...] | None = None
    nuisance_names: tuple[str, ...] | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        n = y.shape[0]
        xt = _as_matrix(self.x_target, n)
        xn = _as_matrix(self.x_nuisance, n)
        if xt.shape[0] != n or xn.shape[0] != n:
            raise DomainError("covariate blocks must have one row per outcome")
        if xt.shape[1] < 1:
            raise DomainError("at least one target column is required")
        for name, arr in (("y", y), ("x_target", xt), ("x_nuisance", xn)):
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} contains non-finite values")
        tn = self.target_names or tuple(f"x{j + 1}" for j in range(xt.shape[1]))
        nn = self.nuisance_names or tuple(f"z{j + 1}" for j in range(xn.shape[1]))
        if len(tn) != xt.shape[1] or len(nn) != xn.shape[1]:
            raise DomainError("column names do not match covariate widths")
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "x_target", _frozen(xt))
        object.__setattr__(self, "x_nuisance", _frozen(xn))
        object.__setattr__(self, "target_names", tuple(tn))
        object.__setattr__(self, "nuisance_names", tuple(nn))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    def regression_design(self) -> np.ndarray:
        """``[1 | x_nuisance | x_target]``."""
        return np.column_stack([np.ones(self.n), self.x_nuisance, self.x_target])


@dataclass(frozen=True)
class FittedModel:
    """Result of maximizing a per-observation estimating equation.

    Attributes
    ----------
    family : str
        One of ``FAMILIES``.
    theta_hat : ndarray, shape (m,)
        Estimate ordered as ``(alpha, beta)``.
    score_contrib : ndarray, shape (n, m)
        Per-observation gradient of psi at ``theta_hat``.
    hessian_contrib : ndarray, shape (m, m)
        Mean of the negative per-observation Hessian (the bread, J).
    dispersion : float
        Scale ``phi`` such that ``phi * J^{-1}`` is the covariance implied by
        the working model (residual variance for the linear family, 1 for
        the logistic family, the pooled-variance term for two means).
    """

    family: str
    theta_hat: np.ndarray
    score_contrib: np.ndarray
    hessian_contrib: np.ndarray
    n: int
    m0: int
    m1: int
    design: np.ndarray
    y: np.ndarray
    dispersion: float
    param_names: tuple[str, ...]
    pi: tuple[float, float] | None = None
    iterations: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.m0 + self.m1

    @property
    def alpha_hat(self) -> np.ndarray:
        return self.theta_hat[: self.m0]

    @property
    def beta_hat(self) -> np.ndarray:
        return self.theta_hat[self.m0 :]

    @property
    def mean_score(self) -> np.ndarray:
        return self.score_contrib.mean(axis=0)


def _check_rank(design):
    if design.shape[0] <= design.shape[1]:
        raise InsufficientSampleError(
            f"need n > m, got n={design.shape[0]}, m={design.shape[1]}"
        )
    s = np.linalg.svd(design, compute_uv=False)
    if s[0] == 0 or s[-1] / s[0] < RCOND_MIN:
        raise SingularDesignError("design matrix is rank deficient")


def fit_two_means(data: Dataset, pi1_known: float | None = None) -> FittedModel:
    """Difference in means, ``theta = mu_1 - mu_0``.

    The estimating equation is the mean of ``(2X - 1) Y / pi_X - theta``.
    With ``pi`` estimated by the group proportions the estimate is exactly
    ``mean(y | x=1) - mean(y | x=0)``. Score contributions are centered within
    group, ``(2X - 1) (Y - mu_hat_X) / pi_X``, so their outer product targets
    ``sum_i pi_Xi^-2 Var(Y_i | X_i) / n`` (the design is treated as fixed).
    """
    if data.x_nuisance.shape[1] != 0 or data.x_target.shape[1] != 1:
        raise DomainError("two_means needs a single binary target and no nuisance columns")
    x = data.x_target[:, 0]
    if not np.all((x == 0) | (x == 1)):
        raise DomainError("two_means target column must be coded 0/1")
    y = data.y
    n = data.n
    g1 = x == 1
    n1 = int(g1.sum())
    n0 = n - n1
    if n1 == 0 or n0 == 0:
        raise DegenerateDesignError("both groups need at least one observation")
    if n < 2:
        raise InsufficientSampleError("need at least two observations")
    mu1 = y[g1].mean()
    mu0 = y[~g1].mean()
    if pi1_known is None:
        pi1 = n1 / n
        theta = mu1 - mu0
    else:
        pi1 = float(pi1_known)
        if not 0.0 < pi1 < 1.0:
            raise DomainError(f"pi1 must lie in (0, 1), got {pi1!r}")
        theta = (n1 / n) / pi1 * mu1 - (n0 / n) / (1.0 - pi1) * mu0
    pi0 = 1.0 - pi1
    pi_x = np.where(g1, pi1, pi0)
    centered = y - np.where(g1, mu1, mu0)
    scores = ((2.0 * x - 1.0) * centered / pi_x)[:, None]
    var1 = np.mean(centered[g1] ** 2)
    var0 = np.mean(centered[~g1] ** 2)
    pooled = (n1 * var1 + n0 * var0) / n
    dispersion = float(np.mean(pi_x**-2) * pooled)
    return FittedModel(
        family="two_means",
        theta_hat=_frozen([theta]),
        score_contrib=_frozen(scores),
        hessian_contrib=_frozen([[1.0]]),
        n=n,
        m0=0,
        m1=1,
        design=_frozen(x[:, None]),
        y=data.y,
        dispersion=dispersion,
        param_names=data.target_names,
        pi=(pi1, pi0),
        extra={"mu1": float(mu1), "mu0": float(mu0), "var1": float(var1), "var0": float(var0)},
    )


def fit_linear(data: Dataset) -> FittedModel:
    """Least squares, i.e. maximize the mean of ``-(y - X theta)^2 / 2``."""
    X = data.regression_design()
    _check_rank(X)
    theta, *_ = np.linalg.lstsq(X, data.y, rcond=None)
    resid = data.y - X @ theta
    n = data.n
    return FittedModel(
        family="linear",
        theta_hat=_frozen(theta),
        score_contrib=_frozen(resid[:, None] * X),
        hessian_contrib=_frozen(X.T @ X / n),
        n=n,
        m0=1 + data.x_nuisance.shape[1],
        m1=data.x_target.shape[1],
        design=_frozen(X),
        y=data.y,
        dispersion=float(resid @ resid / n),
        param_names=("(Intercept)",) + data.nuisance_names + data.target_names,
    )


def _loglik(eta, y):
    # sum of y*eta - log(1 + exp(eta)), overflow-safe
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def fit_logistic(data: Dataset) -> FittedModel:
    """Bernoulli likelihood with logit link, fitted by damped Newton steps.

    Raises
    ------
    SeparationError
        If any linear predictor exceeds 30 in magnitude or Newton fails to
        reach a mean score below 1e-10 (with a negligible step) within 100
        iterations.
    """
    y = data.y
    if not np.all((y == 0) | (y == 1)):
        raise DomainError("logistic outcome must be coded 0/1")
    X = data.regression_design()
    _check_rank(X)
    n, m = X.shape
    theta = np.zeros(m)
    eta = X @ theta
    ll = _loglik(eta, y)
    for it in range(NEWTON_MAXITER + 1):
        p = expit(eta)
        score = X.T @ (y - p) / n
        w = p * (1.0 - p)
        info = (X * w[:, None]).T @ X / n
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError as exc:
            raise SeparationError("information matrix became singular") from exc
        # under separation the score vanishes while the step does not
        if np.max(np.abs(score)) < NEWTON_TOL and np.max(np.abs(step)) < STEP_TOL * (1.0 + np.max(np.abs(theta))):
            break
        if it == NEWTON_MAXITER:
            raise SeparationError(f"Newton did not converge in {NEWTON_MAXITER} iterations")
        for _ in range(MAX_HALVINGS + 1):
            cand = theta + step
            eta_c = X @ cand
            if np.max(np.abs(eta_c)) > MAX_LINEAR_PREDICTOR:
                raise SeparationError(
                    "linear predictor exceeded 30 in magnitude; data are likely separated"
                )
            ll_c = _loglik(eta_c, y)
            if ll_c >= ll:
                break
            step = step / 2.0
        theta, eta, ll = cand, eta_c, ll_c
    p = expit(eta)
    w = p * (1.0 - p)
    return FittedModel(
        family="logistic",
        theta_hat=_frozen(theta),
        score_contrib=_frozen((y - p)[:, None] * X),
        hessian_contrib=_frozen((X * w[:, None]).T @ X / n),
        n=n,
        m0=1 + data.x_nuisance.shape[1],
        m1=data.x_target.shape[1],
        design=_frozen(X),
        y=data.y,
        dispersion=1.0,
        param_names=("(Intercept)",) + data.nuisance_names + data.target_names,
        iterations=it,
    )


def fit(data: Dataset, family: str, pi1_known: float | None = None) -> FittedModel:
    """Dispatch on ``family``."""
    if family == "two_means":
        return fit_two_means(data, pi1_known)
    if pi1_known is not None:
        raise DomainError("pi1 applies only to the two_means family")
    if family == "linear":
        return fit_linear(data)
    if family == "logistic":
        return fit_logistic(data)
    raise DomainError(f"unknown family {family!r}; expected one of {FAMILIES}")
