from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from demojudge.budgeting import (
    budget_for_miss,
    coverage_probability,
    expected_attempts,
    expected_attempts_given_accepted,
    stratum_budget_plan,
)
from demojudge.core import ConfigurationError, StratumBudgets, Thresholds
from demojudge.rng import substream


def test_coverage_values():
    assert coverage_probability(0.5, 1) == 0.5
    assert coverage_probability(0.0, 7) == 0.0
    assert coverage_probability(1.0, 7) == 1.0
    assert coverage_probability(0.3, 20) == pytest.approx(0.999202, abs=1e-6)
    with pytest.raises(ConfigurationError):
        coverage_probability(1.1, 3)
    with pytest.raises(ConfigurationError):
        coverage_probability(0.5, 0)


@settings(max_examples=100, deadline=None)
@given(
    rho=st.floats(min_value=0.0, max_value=1.0),
    k=st.integers(min_value=1, max_value=60),
)
def test_coverage_monotone(rho, k):
    base = coverage_probability(rho, k)
    assert coverage_probability(min(rho + 0.05, 1.0), k) >= base
    assert coverage_probability(rho, k + 1) >= base


def test_budget_for_miss_values():
    assert budget_for_miss(0.3, 0.05) == 9
    assert 0.7**9 <= 0.05 < 0.7**8
    assert budget_for_miss(0.5, 0.5) == 1
    assert budget_for_miss(0.1, 0.01) == 44
    assert 0.9**44 <= 0.01 < 0.9**43


def test_budget_for_miss_domain_errors():
    for rho in (0.0, 1.0):
        with pytest.raises(ConfigurationError):
            budget_for_miss(rho, 0.05)
    for delta in (0.0, 1.0):
        with pytest.raises(ConfigurationError):
            budget_for_miss(0.3, delta)


@settings(max_examples=300, deadline=None)
@given(
    rho=st.floats(min_value=0.01, max_value=0.99),
    delta=st.floats(min_value=0.001, max_value=0.9),
)
def test_budget_for_miss_is_tight(rho, delta):
    k = budget_for_miss(rho, delta)
    assert (1.0 - rho) ** k <= delta * (1.0 + 1e-9)
    if k > 1:
        assert (1.0 - rho) ** (k - 1) > delta * (1.0 - 1e-9)


def test_budget_exact_integer_boundary():
    # log(0.25) / log(0.5) is exactly 2; float noise must not bump it to 3.
    assert budget_for_miss(0.5, 0.25) == 2
    assert budget_for_miss(0.5, 0.125) == 3


def test_stratum_plan_at_defaults():
    plan = stratum_budget_plan(Thresholds(), StratumBudgets(), delta=0.05)
    assert plan.k_l2 == 9
    assert plan.k_l3 == 29
    assert plan.miss_l2 == pytest.approx(0.7**20, rel=1e-9)
    assert plan.miss_l3 == pytest.approx(0.9**30, rel=1e-9)
    assert plan.miss_l2 == pytest.approx(7.98e-4, rel=1e-3)
    assert plan.miss_l3 == pytest.approx(0.0424, rel=1e-2)


def test_expected_attempts_values():
    assert expected_attempts(1.0, 5) == 1.0
    assert expected_attempts(0.5, 3) == pytest.approx(1.75)
    assert expected_attempts(0.2, 20) == pytest.approx(4.942, abs=1e-3)
    assert expected_attempts(0.0, 20) == 20.0
    with pytest.raises(ConfigurationError):
        expected_attempts(-0.1, 5)
    with pytest.raises(ConfigurationError):
        expected_attempts(1.2, 5)


@settings(max_examples=200, deadline=None)
@given(
    a=st.floats(min_value=0.001, max_value=1.0),
    k=st.integers(min_value=1, max_value=100),
)
def test_expected_attempts_bound(a, k):
    value = expected_attempts(a, k)
    assert value <= min(k, 1.0 / a) + 1e-12
    # Matches the direct truncated sum.
    direct = sum((1.0 - a) ** (i - 1) for i in range(1, k + 1))
    assert value == pytest.approx(direct, rel=1e-9)


def test_expected_attempts_matches_simulation():
    rng = substream(77, "attempts-mc")
    k = 20
    for a in (0.2, 0.5, 0.8):
        draws = np.minimum(rng.geometric(a, size=100_000), k)
        assert float(draws.mean()) == pytest.approx(expected_attempts(a, k), rel=0.02)


def test_conditional_expected_attempts():
    # Removing exhausted runs lowers the mean below the truncated mean.
    a, k = 0.2, 20
    conditional = expected_attempts_given_accepted(a, k)
    assert conditional < expected_attempts(a, k)
    assert conditional == pytest.approx(4.7667, abs=1e-3)
    with pytest.raises(ConfigurationError):
        expected_attempts_given_accepted(0.0, 5)


def test_coverage_matches_simulation():
    rng = substream(78, "coverage-mc")
    n = 100_000
    for rho, k in ((0.3, 20), (0.5, 5)):
        successes = rng.random((n, k)) < rho
        freq = float(successes.any(axis=1).mean())
        expected = coverage_probability(rho, k)
        sigma = math.sqrt(expected * (1 - expected) / n)
        assert abs(freq - expected) <= 3 * sigma
