from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from demojudge.core import (
    AcceptanceThresholds,
    ConfigurationError,
    DemoContext,
    DemoPool,
    Demonstration,
    DifficultyLevel,
    StratumBudgets,
    Thresholds,
    make_synthetic_pool,
    sample_balanced_context,
)
from demojudge.rng import key_uniform, substream


def test_levels_are_totally_ordered_by_difficulty():
    assert DifficultyLevel.L1 < DifficultyLevel.L2 < DifficultyLevel.L3 < DifficultyLevel.LX


def test_thresholds_validate_ordering():
    Thresholds(0.75, 0.3, 0.1)
    with pytest.raises(ConfigurationError):
        Thresholds(alpha=0.3, beta=0.3, gamma=0.1)
    with pytest.raises(ConfigurationError):
        Thresholds(alpha=0.75, beta=0.1, gamma=0.3)
    with pytest.raises(ConfigurationError):
        Thresholds(alpha=1.0, beta=0.3, gamma=0.1)


def test_budgets_validate_monotonicity():
    StratumBudgets(10, 20, 30)
    StratumBudgets(10, 10, 10)  # equality is a permitted degenerate config
    with pytest.raises(ConfigurationError):
        StratumBudgets(20, 10, 30)
    with pytest.raises(ConfigurationError):
        StratumBudgets(0, 1, 2)
    assert StratumBudgets(10, 20, 30).for_level(DifficultyLevel.L3) == 30
    with pytest.raises(ConfigurationError):
        StratumBudgets().for_level(DifficultyLevel.LX)


def test_acceptance_thresholds_open_interval():
    AcceptanceThresholds(0.5, 0.5, 0.5)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ConfigurationError):
            AcceptanceThresholds(tau_l1=bad)
    with pytest.raises(ConfigurationError):
        AcceptanceThresholds().for_level(DifficultyLevel.LX)


def test_single_class_pool_is_invalid():
    with pytest.raises(ConfigurationError):
        DemoPool({0: (Demonstration("a", 0),)})


def test_pool_rejects_empty_bucket_and_label_gaps():
    with pytest.raises(ConfigurationError):
        DemoPool({0: (Demonstration("a", 0),), 1: ()})
    with pytest.raises(ConfigurationError):
        DemoPool({0: (Demonstration("a", 0),), 2: (Demonstration("c", 2),)})
    with pytest.raises(ConfigurationError):
        DemoPool({0: (Demonstration("a", 1),), 1: (Demonstration("b", 1),)})


def test_context_requires_one_demo_per_class():
    a, b = Demonstration("a", 0), Demonstration("b", 1)
    DemoContext((a, b))
    DemoContext((b, a))
    with pytest.raises(ConfigurationError):
        DemoContext((a,))
    with pytest.raises(ConfigurationError):
        DemoContext((a, a))
    with pytest.raises(ConfigurationError):
        DemoContext((a, Demonstration("c", 2)))


def test_two_class_orders_are_equiprobable():
    pool = make_synthetic_pool(2, 1)
    rng = substream(7, "orders")
    n = 20_000
    first = sum(
        sample_balanced_context(pool, rng).demos[0].label == 0 for _ in range(n)
    )
    # Only two orders exist; each should appear with probability 1/2.
    sigma = math.sqrt(n * 0.25)
    assert abs(first - n / 2) <= 3 * sigma


def test_enumerated_context_space_is_uniform(tiny_pool):
    # 2 * 1 * 1 choices times 3! orders = 12 equiprobable contexts.
    assert tiny_pool.n_contexts() == 12
    n = 120_000
    rng = substream(12345, "uniformity")
    counts: dict[tuple[str, ...], int] = {}
    for _ in range(n):
        ids = sample_balanced_context(tiny_pool, rng).demo_ids()
        counts[ids] = counts.get(ids, 0) + 1
    assert len(counts) == 12
    expected = n / 12
    sigma = math.sqrt(n * (1 / 12) * (11 / 12))
    for count in counts.values():
        assert abs(count - expected) <= 3 * sigma
    result = stats.chisquare(list(counts.values()))
    assert result.pvalue >= 0.001


def test_sampler_is_reproducible_across_streams(pool):
    ids_a = [sample_balanced_context(pool, substream(99, "s", i)).demo_ids() for i in range(50)]
    ids_b = [sample_balanced_context(pool, substream(99, "s", i)).demo_ids() for i in range(50)]
    assert ids_a == ids_b
    ids_c = [sample_balanced_context(pool, substream(100, "s", i)).demo_ids() for i in range(50)]
    assert ids_a != ids_c


@settings(max_examples=50, deadline=None)
@given(
    n_labels=st.integers(min_value=2, max_value=5),
    per_class=st.integers(min_value=1, max_value=6),
    seed=st.integers(min_value=0, max_value=2**32),
)
def test_every_sampled_context_is_valid(n_labels, per_class, seed):
    pool = make_synthetic_pool(n_labels, per_class)
    rng = substream(seed, "prop")
    for index in range(10):
        context = sample_balanced_context(pool, rng, sample_index=index)
        assert len(context.demos) == n_labels
        assert sorted(d.label for d in context.demos) == list(range(n_labels))
        assert context.sample_index == index


def test_key_uniform_is_deterministic_and_in_unit_interval():
    u1 = key_uniform("a", 1, "b")
    u2 = key_uniform("a", 1, "b")
    assert u1 == u2
    assert 0.0 < u1 < 1.0
    assert key_uniform("a", 1, "c") != u1
    # Length-prefixed encoding: concatenation ambiguity must not collide.
    assert key_uniform("ab", "c") != key_uniform("a", "bc")
