import itertools
import math

import pytest
from hypothesis import assume, given, strategies as st

from robust_es.convert import (
    KINDS,
    ConversionContext,
    classify_effect,
    cohens_d_bias_grid,
    cohens_d_bias_ratio,
    convert,
    r2_bias_ratio,
)
from robust_es.effectsize import closed_form_two_means
from robust_es.errors import DomainError, InfiniteEffectError

HALF = ConversionContext(pi1=0.5)
probs = st.floats(0.01, 0.99)
variances = st.floats(1e-3, 1e3)


@pytest.mark.parametrize("d,s", [(0.2, 0.1), (0.5, 0.25), (0.8, 0.4)])
def test_cohen_anchors(d, s):
    assert convert(d, "d", "s", HALF) == s
    assert convert(s, "s", "d", HALF) == d


def test_table_cells():
    assert convert(0.25, "s", "f2") == pytest.approx(0.0625, rel=1e-15)
    assert convert(0.5, "r2", "s") == pytest.approx(1.0, rel=1e-15)
    assert convert(0.25, "f2", "r2") == pytest.approx(0.2)
    # d -> R^2 = d^2 / (1/pi1 + 1/pi0 + d^2)
    ctx = ConversionContext(pi1=0.3)
    c = 1 / 0.3 + 1 / 0.7
    assert convert(1.2, "d", "r2", ctx) == pytest.approx(1.44 / (c + 1.44), rel=1e-14)
    assert convert(-1.2, "d", "f2", ctx) == pytest.approx(1.44 / c, rel=1e-14)


@pytest.mark.parametrize("kind", KINDS)
def test_identity(kind):
    assert convert(0.3, kind, kind) == 0.3
    if kind == "d":
        assert convert(-0.3, kind, kind) == 0.3


def test_whole_model_r2():
    ctx = ConversionContext(r2_full=0.4)
    # f2_b = R2_b / (1 - R2)
    assert convert(0.1, "r2", "f2", ctx) == pytest.approx(0.1 / 0.6)
    assert convert(convert(0.1, "r2", "s", ctx), "s", "r2", ctx) == pytest.approx(0.1, rel=1e-12)


def test_errors():
    with pytest.raises(InfiniteEffectError):
        convert(1.0, "r2", "s")
    with pytest.raises(DomainError):
        convert(-0.1, "f2", "s")
    with pytest.raises(DomainError):
        convert(1.5, "r2", "s")
    with pytest.raises(DomainError):
        convert(0.1, "s", "cohen")
    with pytest.raises(DomainError):
        ConversionContext(pi1=1.0)


@given(v=st.floats(1e-6, 50), pi=probs)
def test_round_trips(v, pi):
    ctx = ConversionContext(pi1=pi)
    for a, b in itertools.permutations(KINDS, 2):
        value = v if a != "r2" else v / (1 + v)
        back = convert(convert(value, a, b, ctx), b, a, ctx)
        assert back == pytest.approx(value, rel=1e-12)


@given(d=st.floats(1e-6, 10), sigma=st.floats(0.01, 100), pi=probs)
def test_d_row_matches_two_means(d, sigma, pi):
    expected = closed_form_two_means(d * sigma, 0.0, sigma**2, sigma**2, pi)
    assert convert(d, "d", "s", ConversionContext(pi1=pi)) == pytest.approx(expected, rel=1e-12, abs=1e-300)


@given(v=st.floats(1e-4, 20), dv=st.floats(1e-3, 5), pi=probs)
def test_monotone(v, dv, pi):
    ctx = ConversionContext(pi1=pi)
    for a, b in itertools.permutations(KINDS, 2):
        lo, hi = (v, v + dv) if a != "r2" else (v / (1 + v), (v + dv) / (1 + v + dv))
        assume(lo < hi)
        assert convert(lo, a, b, ctx) < convert(hi, a, b, ctx)


@pytest.mark.parametrize(
    "s,label",
    [(0.0, "none-small"), (0.1, "none-small"), (0.100001, "small-medium"), (0.25, "small-medium"),
     (0.4, "medium-large"), (0.41, "large"), (3.0, "large")],
)
def test_classify(s, label):
    assert classify_effect(s) == label


def test_classify_negative():
    with pytest.raises(DomainError):
        classify_effect(-0.1)


class TestBiasRatios:
    def test_hand_value(self):
        # ratio^2 simplifies to ((1-pi) v1 + pi v0) / (pi v1 + (1-pi) v0)
        assert cohens_d_bias_ratio(4.0, 1.0, 0.25) == pytest.approx(math.sqrt(3.25 / 1.75), rel=1e-14)
        assert cohens_d_bias_ratio(4.0, 1.0, 0.25) == pytest.approx(1.363, abs=5e-4)

    @given(v1=variances, v0=variances)
    def test_no_bias_half(self, v1, v0):
        assert cohens_d_bias_ratio(v1, v0, 0.5) == pytest.approx(1.0, abs=1e-12)

    @given(v=variances, pi=probs)
    def test_no_bias_equal_variance(self, v, pi):
        assert cohens_d_bias_ratio(v, v, pi) == pytest.approx(1.0, abs=1e-12)

    @given(v1=variances, v0=variances, pi=probs)
    def test_point_symmetry(self, v1, v0, pi):
        # surface over (log2 v1/v0, pi1) is symmetric about (0, 1/2)
        assert cohens_d_bias_ratio(v1, v0, pi) == pytest.approx(cohens_d_bias_ratio(v0, v1, 1 - pi), rel=1e-12)

    @given(v1=variances, v0=variances, pi=probs)
    def test_reciprocal_pairs(self, v1, v0, pi):
        assert cohens_d_bias_ratio(v1, v0, pi) * cohens_d_bias_ratio(v0, v1, pi) == pytest.approx(1.0, rel=1e-12)
        assert cohens_d_bias_ratio(v1, v0, pi) * cohens_d_bias_ratio(v1, v0, 1 - pi) == pytest.approx(1.0, rel=1e-12)

    def test_direction(self):
        assert cohens_d_bias_ratio(4.0, 1.0, 0.25) > 1
        assert cohens_d_bias_ratio(1.0, 4.0, 0.25) < 1

    def test_r2(self):
        assert r2_bias_ratio(1.0, 1.0, 1.0, 2.0) == pytest.approx(2 / 3)
        assert r2_bias_ratio(0.0, 2.0, 3.0, 1.5) == pytest.approx(4.0)
        assert r2_bias_ratio(0.7, 2.0, 3.0, 6.0) == pytest.approx(1.0, abs=1e-15)

    def test_grid(self):
        rows = cohens_d_bias_grid([-1.0, 0.0, 1.0], [0.25, 0.5])
        assert len(rows) == 6
        assert rows[2][2] == pytest.approx(1.0)
