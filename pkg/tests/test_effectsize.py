import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from robust_es.effectsize import (
    analyze,
    closed_form_slr,
    closed_form_two_means,
    estimate_effect_size,
    logistic_model_based_S,
)
from robust_es.errors import DomainError, InsufficientSampleError
from robust_es.models import Dataset


class TestEstimator:
    def test_boundary(self):
        e = estimate_effect_size(3.0, n=50, m=3, m1=1)
        assert e.s_hat == 0.0
        assert not e.truncated
        assert e.s_sq_untruncated == 0.0

    def test_zero_statistic(self):
        e = estimate_effect_size(0.0, n=30, m=2, m1=1)
        assert e.s_hat == 0.0 and e.truncated
        assert e.s_sq_untruncated == pytest.approx(-2 / 28)

    def test_inverted_value(self):
        # 2 + 98 * 0.25**2 = 8.125
        e = estimate_effect_size(8.125, n=100, m=2, m1=1)
        assert e.s_hat == pytest.approx(0.25, abs=1e-15)

    def test_insufficient(self):
        with pytest.raises(InsufficientSampleError):
            estimate_effect_size(5.0, n=3, m=3, m1=1)

    def test_bad_dims(self):
        with pytest.raises(DomainError):
            estimate_effect_size(5.0, n=30, m=2, m1=3)

    @given(st.floats(0, 1e6), st.floats(0, 1e3), st.integers(5, 10_000), st.integers(1, 4))
    def test_monotone_and_invariants(self, t2, dt, n, m):
        a = estimate_effect_size(t2, n, m, 1)
        b = estimate_effect_size(t2 + dt, n, m, 1)
        assert b.s_hat >= a.s_hat >= 0
        assert a.s_hat == math.sqrt(max(0.0, a.s_sq_untruncated))
        assert a.truncated == (t2 < m)


class TestClosedForms:
    def test_two_means(self):
        assert closed_form_two_means(1.0, 1.0, 2.0, 3.0, 0.3) == 0.0
        assert closed_form_two_means(1.0, 0.0, 1.0, 1.0, 0.5) == pytest.approx(0.5)
        assert closed_form_two_means(0.2, 0.0, 1.0, 1.0, 0.5) == pytest.approx(0.1)

    def test_slr(self):
        assert closed_form_slr(0.0, 1.0, 1.0) == 0.0
        assert closed_form_slr(0.3, 1.0, 1.0) == pytest.approx(0.3)
        assert closed_form_slr(1.0, 1.0, 4.0) == pytest.approx(0.5)

    def test_logistic(self):
        assert logistic_model_based_S([0.0], [[2.0]]) == 0.0
        assert logistic_model_based_S([0.3], [[1.0]]) == pytest.approx(0.3)
        assert logistic_model_based_S([1, 1], np.diag([0.25, 0.25])) == pytest.approx(math.sqrt(0.5))
        with pytest.raises(DomainError):
            logistic_model_based_S([1, 1], [[1.0, 2.0], [2.0, 1.0]])

    def test_bad_inputs(self):
        with pytest.raises(DomainError):
            closed_form_two_means(1, 0, 1, 1, 1.0)
        with pytest.raises(DomainError):
            closed_form_slr(1, 0.0, 1)


def test_scale_invariance(rng):
    n = 200
    x = rng.normal(size=n)
    z = rng.normal(size=n)
    y = 0.4 * x + z + rng.normal(size=n)
    a = analyze(Dataset(y=y, x_target=x, x_nuisance=z), "linear").estimate
    b = analyze(Dataset(y=-0.01 * y, x_target=x, x_nuisance=z), "linear").estimate
    assert b.s_hat == pytest.approx(a.s_hat, rel=1e-8)


def test_two_means_pipeline_against_closed_form(rng):
    n = 100_000
    x = (rng.uniform(size=n) < 0.3).astype(float)
    y = np.where(x == 1, rng.normal(0.5, 2.0, n), rng.normal(0.0, 1.0, n))
    est = analyze(Dataset(y=y, x_target=x), "two_means").estimate
    assert est.s_hat == pytest.approx(closed_form_two_means(0.5, 0.0, 4.0, 1.0, 0.3), abs=0.02)


def test_beta0_shifts_reference(rng):
    n = 500
    x = rng.normal(size=n)
    y = 0.8 * x + rng.normal(size=n)
    d = Dataset(y=y, x_target=x)
    at_truth = analyze(d, "linear", beta0=[0.8]).estimate
    at_zero = analyze(d, "linear").estimate
    assert at_truth.s_hat < at_zero.s_hat
