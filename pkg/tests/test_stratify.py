from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from demojudge.core import (
    ConfigurationError,
    DemoContext,
    Demonstration,
    DifficultyLevel,
    Query,
    Thresholds,
    make_synthetic_pool,
)
from demojudge.oracle import SyntheticOracle, SyntheticQuerySpec
from demojudge.rng import substream
from demojudge.stratify import (
    QueryDifficultyProfile,
    TrialRecord,
    assign_level,
    build_supervision,
    estimate_success_rate,
    hoeffding_bound,
    mislabel_bound,
    trials_needed,
)


def _context(i: int) -> DemoContext:
    return DemoContext((Demonstration(f"a{i}", 0), Demonstration(f"b{i}", 1)))


def _profile(query_id: str, outcomes: list[bool], level: DifficultyLevel) -> QueryDifficultyProfile:
    trials = tuple(
        TrialRecord(query_id=query_id, context=_context(i), outcome=o, trial_index=i)
        for i, o in enumerate(outcomes)
    )
    return QueryDifficultyProfile(
        query_id=query_id,
        trials=trials,
        rho_hat=sum(outcomes) / len(outcomes),
        level=level,
    )


def test_rho_hat_is_exact_fraction():
    profile = _profile("q", [True] * 15 + [False] * 5, DifficultyLevel.L1)
    assert profile.rho_hat == 0.75
    with pytest.raises(ConfigurationError):
        QueryDifficultyProfile("q", profile.trials, rho_hat=0.7, level=DifficultyLevel.L1)


def test_assign_level_boundaries(thresholds):
    # Lower edges are inclusive for each stratum.
    assert assign_level(0.75, thresholds) == DifficultyLevel.L1
    assert assign_level(0.3, thresholds) == DifficultyLevel.L2
    assert assign_level(0.1, thresholds) == DifficultyLevel.L3
    assert assign_level(0.0999, thresholds) == DifficultyLevel.LX
    assert assign_level(0.0, thresholds) == DifficultyLevel.LX
    assert assign_level(1.0, thresholds) == DifficultyLevel.L1
    with pytest.raises(ConfigurationError):
        assign_level(1.2, thresholds)


@settings(max_examples=200, deadline=None)
@given(
    lo=st.floats(min_value=0.0, max_value=1.0),
    hi=st.floats(min_value=0.0, max_value=1.0),
)
def test_assign_level_is_monotone(lo, hi):
    thresholds = Thresholds()
    lo, hi = min(lo, hi), max(lo, hi)
    # Higher success rate never maps to a harder stratum.
    assert assign_level(hi, thresholds) <= assign_level(lo, thresholds)


def test_estimate_degenerate_rho_one(pool, thresholds):
    oracle = SyntheticOracle({"q0": SyntheticQuerySpec(rho=1.0)})
    profile = estimate_success_rate(
        Query("q0", 0), pool, 20, oracle, substream(1, "e"), thresholds
    )
    assert profile.rho_hat == 1.0
    assert profile.level == DifficultyLevel.L1
    assert len(profile.trials) == 20
    with pytest.raises(ConfigurationError):
        estimate_success_rate(Query("q0", 0), pool, 0, oracle, substream(1, "e"), thresholds)


def test_rho_hat_distribution_matches_binomial(pool, thresholds):
    # rho = 0.5, T = 20: the estimate's law is Binomial(20, 1/2) / 20.
    n_queries = 50_000
    trials = 20
    oracle = SyntheticOracle(
        {f"q{i:05d}": SyntheticQuerySpec(rho=0.5, concentration=4.0) for i in range(n_queries)}
    )
    counts = np.zeros(trials + 1, dtype=np.int64)
    for i in range(n_queries):
        query = Query(f"q{i:05d}", 0)
        rng = substream(2024, "binomial", i)
        profile = estimate_success_rate(query, pool, trials, oracle, rng, thresholds)
        counts[round(profile.rho_hat * trials)] += 1
    expected = stats.binom.pmf(np.arange(trials + 1), trials, 0.5) * n_queries
    # Merge sparse tails so every chi-squared cell has expectation >= 5.
    observed_cells, expected_cells = [], []
    obs_acc = exp_acc = 0.0
    for obs, exp in zip(counts, expected):
        obs_acc += obs
        exp_acc += exp
        if exp_acc >= 5.0:
            observed_cells.append(obs_acc)
            expected_cells.append(exp_acc)
            obs_acc = exp_acc = 0.0
    observed_cells[-1] += obs_acc
    expected_cells[-1] += exp_acc
    result = stats.chisquare(observed_cells, expected_cells)
    assert result.pvalue >= 0.001


def test_build_supervision_partitions():
    profiles = [
        _profile("a", [True] * 20, DifficultyLevel.L1),
        _profile("b", [True] * 10 + [False] * 10, DifficultyLevel.L2),
        _profile("c", [False] * 20, DifficultyLevel.LX),
    ]
    bundle = build_supervision(profiles)
    assert [qid for qid, _ in bundle.route_set] == ["a", "b", "c"]
    assert len(bundle.judge_sets[DifficultyLevel.L1]) == 20
    assert len(bundle.judge_sets[DifficultyLevel.L2]) == 20
    assert len(bundle.judge_sets[DifficultyLevel.L3]) == 0
    # Extreme-tail trials are dropped; every other trial lands in exactly one set.
    total = sum(len(pairs) for pairs in bundle.judge_sets.values())
    assert total == 20 * 2


def test_build_supervision_all_easy_leaves_other_sets_empty():
    bundle = build_supervision([_profile("a", [True] * 5, DifficultyLevel.L1)])
    assert len(bundle.judge_sets[DifficultyLevel.L2]) == 0
    assert len(bundle.judge_sets[DifficultyLevel.L3]) == 0


def test_build_supervision_rejects_duplicates_and_empty():
    profile = _profile("a", [True] * 5, DifficultyLevel.L1)
    with pytest.raises(ConfigurationError):
        build_supervision([profile, profile])
    with pytest.raises(ConfigurationError):
        build_supervision([])


@settings(max_examples=50, deadline=None)
@given(
    data=st.lists(
        st.tuples(
            st.sampled_from(list(DifficultyLevel)),
            st.lists(st.booleans(), min_size=1, max_size=8),
        ),
        min_size=1,
        max_size=12,
    )
)
def test_supervision_counting_identity(data):
    profiles = [
        _profile(f"q{i}", outcomes, level) for i, (level, outcomes) in enumerate(data)
    ]
    bundle = build_supervision(profiles)
    assert len(bundle.route_set) == len(profiles)
    expected_pairs = sum(
        len(p.trials) for p in profiles if p.level != DifficultyLevel.LX
    )
    assert sum(len(pairs) for pairs in bundle.judge_sets.values()) == expected_pairs


def test_hoeffding_bound_values():
    assert hoeffding_bound(20, 0.2) == pytest.approx(2 * math.exp(-1.6))
    assert hoeffding_bound(20, 0.2) == pytest.approx(0.4038, abs=1e-4)
    assert hoeffding_bound(10, 0.0) == 1.0  # clamped
    assert hoeffding_bound(67, 0.2) < 0.01
    assert hoeffding_bound(66, 0.2) >= 0.01
    with pytest.raises(ConfigurationError):
        hoeffding_bound(0, 0.1)


def test_mislabel_bound_values():
    assert mislabel_bound(20, 0.15) == pytest.approx(math.exp(-0.9))
    assert mislabel_bound(20, 0.15) == pytest.approx(0.4066, abs=1e-4)
    assert mislabel_bound(20, 0.5) == pytest.approx(math.exp(-10.0))
    assert mislabel_bound(20, 0.0) == 1.0  # vacuous at zero margin


def test_trials_needed_values():
    assert trials_needed(0.15, 0.05) == 67
    assert trials_needed(0.15, 0.05, n_queries=1000) == 221
    assert trials_needed(0.3, 1.0) == 1  # log 1 = 0, clamped to one trial
    with pytest.raises(ConfigurationError):
        trials_needed(0.0, 0.05)
    with pytest.raises(ConfigurationError):
        trials_needed(0.15, 0.0)
