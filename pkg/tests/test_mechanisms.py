import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from dpcluster.mechanisms import (
    PrivacyBudget,
    RandomSource,
    exponential_select,
    laplace_cdf,
    laplace_sample,
    noisy_count,
    selection_probabilities,
)
from dpcluster.metric import InputError

N = 1_000_000


def test_budget_validation():
    with pytest.raises(InputError):
        PrivacyBudget(0.0, 0.1)
    with pytest.raises(InputError):
        PrivacyBudget(1.0, 1.5)
    with pytest.raises(InputError):
        PrivacyBudget(1.0, 0.0).require_approximate()
    assert PrivacyBudget(1.0, 1.0).require_approximate().delta_p == 1.0


def test_random_source_streams():
    a = RandomSource(5).uniform(10)
    assert np.array_equal(a, RandomSource(5).uniform(10))
    assert not np.array_equal(a, RandomSource(6).uniform(10))
    s0, s1 = RandomSource(5).substream(0).uniform(10), RandomSource(5).substream(1).uniform(10)
    assert not np.array_equal(s0, s1)
    assert np.array_equal(s0, RandomSource(5).substream(0).uniform(10))
    u = RandomSource(1).uniform(N)
    assert u.min() > 0 and u.max() < 1


def test_laplace_rejects_bad_scale():
    with pytest.raises(InputError):
        laplace_sample(0.0, RandomSource(0))


@pytest.mark.parametrize("beta", [0.5, 0.1, 0.01])
def test_laplace_tail(beta):
    x = laplace_sample(2.0, RandomSource(11), size=N)
    assert abs(np.mean(np.abs(x) > 2.0 * math.log(1 / beta)) - beta) < 0.01


def test_laplace_mean_and_cdf():
    x = laplace_sample(1.0, RandomSource(12), size=N)
    assert abs(x.mean()) < 0.005
    # analytic CDF agrees with scipy's independent implementation
    grid = np.linspace(-10, 10, 41)
    assert np.allclose(laplace_cdf(grid, 1.7), stats.laplace.cdf(grid, scale=1.7), atol=1e-14)


def test_noisy_count_examples():
    vals = noisy_count(10, 1.0, 0.5, RandomSource(3), size=N)
    assert abs(vals.mean() - 10) < 0.01 * 2.0
    tight = noisy_count(10, 1.0, 1e6, RandomSource(4), size=10_000)
    assert np.mean(np.abs(tight - 10) <= 1e-4) > 0.99
    zero = noisy_count(0, 2.0, 0.5, RandomSource(5), size=200_000)
    assert stats.kstest(zero, stats.laplace(scale=4.0).cdf).statistic < 0.005
    with pytest.raises(InputError):
        noisy_count(1, 1.0, 0.0, RandomSource(0))


def test_selection_probabilities_oracle():
    p = selection_probabilities([100.0, 100.0, 50.0], 1.0)
    denom = 2 * math.exp(100) + math.exp(50)
    assert p[0] == pytest.approx(math.exp(100) / denom, rel=1e-12)
    assert p[2] < 1e-10
    # scores far beyond exp's range do not overflow
    huge = selection_probabilities([1e6, 1e6 - 1, 0.0], 1.0)
    assert huge[0] == pytest.approx(math.e / (math.e + 1))
    assert np.isfinite(huge).all()


def test_selection_errors():
    with pytest.raises(InputError):
        selection_probabilities([], 1.0)
    with pytest.raises(InputError):
        selection_probabilities([1.0, float("nan")], 1.0)
    with pytest.raises(InputError):
        selection_probabilities([1.0], -1.0)


def test_exponential_two_scores():
    eps = 0.7
    draws = exponential_select([0.0, math.log(2) / eps], eps, RandomSource(8), size=N)
    assert abs(np.mean(draws == 1) - 2 / 3) < 0.005


def test_exponential_uniform_at_zero_eps():
    draws = exponential_select([5.0, 1.0, -3.0, 0.0], 0.0, RandomSource(9), size=400_000)
    assert np.allclose(np.bincount(draws, minlength=4) / 400_000, 0.25, atol=0.005)


def test_exponential_single_draw_is_int():
    i = exponential_select([1.0, 2.0], 1.0, RandomSource(0))
    assert isinstance(i, (int, np.integer))


@settings(max_examples=30)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=8), st.floats(0, 5), st.integers(0, 2**32))
def test_exponential_deterministic(scores, eps, seed):
    a = exponential_select(scores, eps, RandomSource(seed), size=20)
    b = exponential_select(scores, eps, RandomSource(seed), size=20)
    assert np.array_equal(a, b)
    assert ((0 <= a) & (a < len(scores))).all()


@settings(max_examples=30)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=8), st.floats(0, 5))
def test_probabilities_are_softmax(scores, eps):
    p = selection_probabilities(scores, eps)
    s = np.asarray(scores) * eps
    oracle = np.exp(s - s.max()) / np.exp(s - s.max()).sum()
    assert np.allclose(p, oracle, atol=1e-12)
    assert p.sum() == pytest.approx(1.0)
