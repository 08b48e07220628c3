import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import expit

from robust_es.errors import CovarianceSingularError, DomainError
from robust_es.models import Dataset, fit_linear, fit_logistic, fit_two_means
from robust_es.sandwich import partitioned_beta_covariance, sandwich_covariance, wald_statistic


def _logistic_data(rng, n, beta=(0.7, -0.4)):
    z = rng.normal(size=(n, 2))
    x = 0.5 * z[:, :1] + rng.normal(size=(n, 1)) + 0.7 * rng.normal(size=(n, 2))
    eta = -0.3 + z @ [0.4, 0.2] + x @ np.asarray(beta)
    y = (rng.uniform(size=n) < expit(eta)).astype(float)
    return Dataset(y=y, x_target=x, x_nuisance=z)


def test_equal_residuals_bread_equals_sandwich():
    # residuals (1, -1, -1, 1) are orthogonal to [1, x] and equal in magnitude
    x = np.array([-1.0, -1.0, 1.0, 1.0])
    y = 1 + 2 * x + np.array([1.0, -1.0, -1.0, 1.0])
    model = fit_linear(Dataset(y=y, x_target=x))
    cov = sandwich_covariance(model)
    assert_allclose(cov.sigma_beta, cov.model_based_beta_cov, rtol=1e-10)


def test_two_means_zero_within_variance():
    with pytest.raises(CovarianceSingularError):
        sandwich_covariance(fit_two_means(Dataset(y=[1, 1, 3, 3], x_target=[0, 0, 1, 1])))


def test_two_means_hand_values():
    model = fit_two_means(Dataset(y=[0, 2, 4, 6], x_target=[0, 0, 1, 1]))
    cov = sandwich_covariance(model)
    assert cov.sigma_theta[0, 0] == pytest.approx(4.0, rel=1e-14)
    assert wald_statistic(model, cov, [0.0]).t_squared == pytest.approx(16.0, rel=1e-14)


def test_wald_zero_at_estimate(rng):
    d = _logistic_data(rng, 300)
    model = fit_logistic(d)
    cov = sandwich_covariance(model)
    res = wald_statistic(model, cov, model.beta_hat)
    assert res.t_squared == 0.0
    assert res.df == 2


def test_wald_beta0_length():
    model = fit_linear(Dataset(y=[1, 2, 4, 3], x_target=[0, 1, 2, 3]))
    with pytest.raises(DomainError):
        wald_statistic(model, sandwich_covariance(model), [0.0, 0.0])


def test_affine_invariance(rng):
    n = 120
    z = rng.normal(size=(n, 2))
    x = rng.normal(size=(n, 2))
    y = z @ [1, -1] + x @ [0.3, 0.2] + rng.normal(size=n) * (1 + np.abs(x[:, 0]))

    def t2(yy, xx):
        m = fit_linear(Dataset(y=yy, x_target=xx, x_nuisance=z))
        return wald_statistic(m, sandwich_covariance(m)).t_squared

    base = t2(y, x)
    assert t2(4.2 * y, x) == pytest.approx(base, rel=1e-8)
    assert t2(y, x * [-3.0, 1.0]) == pytest.approx(base, rel=1e-8)


def test_slr_closed_form_sigma_beta(rng):
    # with an intercept, the slope block equals mean((x - xbar)^2 r^2) / var(x)^2
    n = 200
    x = rng.normal(size=n)
    y = 0.5 * x + rng.normal(size=n) * np.abs(x)
    model = fit_linear(Dataset(y=y, x_target=x))
    cov = sandwich_covariance(model)
    r = y - model.design @ model.theta_hat
    xc = x - x.mean()
    expected = np.mean(xc**2 * r**2) / np.mean(xc**2) ** 2
    assert cov.sigma_beta[0, 0] == pytest.approx(expected, rel=1e-10)


def test_partitioned_formula_matches_generic(rng):
    for n in (80, 500):
        d = _logistic_data(rng, n)
        model = fit_logistic(d)
        cov = sandwich_covariance(model)
        p = expit(model.design @ model.theta_hat)
        q = (model.y - p) ** 2
        sigma, i_inv = partitioned_beta_covariance(model.design, model.m0, p * (1 - p), q)
        assert_allclose(sigma, cov.sigma_beta, rtol=1e-8)
        assert_allclose(i_inv, cov.model_based_beta_cov, rtol=1e-8)


def test_partitioned_formula_linear_weights(rng):
    # the formula is generic in the weights; linear regression uses P = 1
    n = 150
    z = rng.normal(size=(n, 1))
    x = rng.normal(size=(n, 2)) + z
    y = z[:, 0] + x @ [0.2, 0.1] + rng.normal(size=n) * (1 + x[:, 0] ** 2)
    model = fit_linear(Dataset(y=y, x_target=x, x_nuisance=z))
    r = y - model.design @ model.theta_hat
    sigma, _ = partitioned_beta_covariance(model.design, model.m0, np.ones(n), r**2)
    assert_allclose(sigma, sandwich_covariance(model).sigma_beta, rtol=1e-8)


def test_matrix_properties(rng):
    d = _logistic_data(rng, 400)
    cov = sandwich_covariance(fit_logistic(d))
    for mat in (cov.J_hat, cov.K_hat, cov.sigma_theta, cov.sigma_beta):
        assert_allclose(mat, mat.T, rtol=1e-10, atol=0)
    assert np.linalg.eigvalsh(cov.K_hat).min() >= -1e-12 * np.trace(cov.K_hat)
    assert np.linalg.eigvalsh(cov.sigma_theta).min() > 0
    assert_allclose(cov.sigma_beta, cov.sigma_theta[cov.m0 :, cov.m0 :])


def test_correct_specification_linear(rng):
    n = 5000
    z = rng.normal(size=(n, 2))
    base = rng.normal(size=(n, 1))
    x = 0.6 * z[:, :1] + base + 0.7 * rng.normal(size=(n, 2))
    y = 1 + z @ [0.3, 0.3] + x @ [0.2, -0.1] + 2 * rng.normal(size=n)
    cov = sandwich_covariance(fit_linear(Dataset(y=y, x_target=x, x_nuisance=z)))
    assert_allclose(cov.sigma_beta, cov.model_based_beta_cov, rtol=0.10)


def test_correct_specification_logistic(rng):
    cov = sandwich_covariance(fit_logistic(_logistic_data(rng, 5000)))
    assert_allclose(cov.sigma_beta, cov.model_based_beta_cov, rtol=0.10)
