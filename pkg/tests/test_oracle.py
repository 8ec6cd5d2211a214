from __future__ import annotations

import math

import numpy as np
import pytest

from demojudge.core import ConfigurationError, Query, make_synthetic_pool, sample_balanced_context
from demojudge.oracle import (
    SyntheticOracle,
    SyntheticQuerySpec,
    adapter_request,
    score_adapter_response,
)
from demojudge.rng import substream
from demojudge.stratify import hoeffding_bound


def _oracle(**kwargs):
    return SyntheticOracle({"q0": SyntheticQuerySpec(**kwargs)})


def test_spec_validation():
    SyntheticQuerySpec(rho=0.5, concentration=4.0, rho_zero=0.2)
    with pytest.raises(ConfigurationError):
        SyntheticQuerySpec(rho=1.5)
    with pytest.raises(ConfigurationError):
        SyntheticQuerySpec(rho=0.5, concentration=0.0)
    with pytest.raises(ConfigurationError):
        SyntheticQuerySpec(rho=0.5, rho_zero=-0.1)


def test_degenerate_rho_zero_and_one(pool):
    query = Query("q0", 0)
    rng = substream(3, "degenerate")
    for rho, expected in ((0.0, False), (1.0, True)):
        oracle = _oracle(rho=rho)
        for _ in range(50):
            context = sample_balanced_context(pool, rng)
            outcome = oracle.evaluate(query, context, rng)
            assert outcome.latent_p == rho
            assert outcome.realized is expected


def test_latent_is_deterministic_per_pair(pool):
    query = Query("q0", 0)
    oracle = _oracle(rho=0.37, concentration=3.0)
    context = sample_balanced_context(pool, substream(5, "ctx"))
    values = {oracle.latent_success_probability(query, context) for _ in range(10)}
    assert len(values) == 1
    # A fresh oracle instance with the same spec agrees: the latent is content-keyed.
    again = _oracle(rho=0.37, concentration=3.0)
    assert again.latent_success_probability(query, context) in values
    # Order matters: a reordered context is a different pair.
    reordered = type(context)(demos=tuple(reversed(context.demos)), sample_index=0)
    assert oracle.latent_success_probability(query, reordered) not in values


def test_latent_mean_matches_rho():
    # Fresh contexts from a space large enough that collisions are negligible.
    pool = make_synthetic_pool(4, 60)
    query = Query("q0", 0)
    oracle = _oracle(rho=0.5, concentration=4.0)
    rng = substream(17, "latent-mean")
    n = 100_000
    total = 0.0
    for _ in range(n):
        context = sample_balanced_context(pool, rng)
        total += oracle.latent_success_probability(query, context)
    mean = total / n
    # Var of the latent distribution is rho*(1-rho)/(concentration+1) = 0.05.
    sigma = math.sqrt(0.05 / n)
    assert abs(mean - 0.5) <= 3 * sigma


def test_estimate_deviation_frequency_is_within_hoeffding(pool):
    # T = 20 trials; deviations >= 0.2 may occur at most at the bounded rate.
    trials, eps, rho = 20, 0.2, 0.5
    n_queries = 2_000
    oracle = SyntheticOracle(
        {f"q{i}": SyntheticQuerySpec(rho=rho, concentration=4.0) for i in range(n_queries)}
    )
    big = 0
    for i in range(n_queries):
        query = Query(f"q{i}", 0)
        rng = substream(23, "hoeffding", i)
        hits = sum(
            oracle.evaluate(query, sample_balanced_context(pool, rng), rng).realized
            for _ in range(trials)
        )
        big += abs(hits / trials - rho) >= eps
    assert big / n_queries <= hoeffding_bound(trials, eps)


def test_zero_shot_is_keyed_and_degenerate_cases_hold():
    rng = substream(31, "zs")
    always = SyntheticOracle({"q0": SyntheticQuerySpec(rho=0.5, rho_zero=1.0)})
    never = SyntheticOracle({"q0": SyntheticQuerySpec(rho=0.5, rho_zero=0.0)})
    query = Query("q0", 0)
    assert all(always.evaluate_zero_shot(query, rng) for _ in range(20))
    assert not any(never.evaluate_zero_shot(query, rng) for _ in range(20))
    # Keyed by query: repeated asking never changes the answer.
    keyed = SyntheticOracle({"q0": SyntheticQuerySpec(rho=0.5, rho_zero=0.6)})
    answers = {keyed.evaluate_zero_shot(query, rng) for _ in range(20)}
    assert len(answers) == 1


def test_zero_shot_rate_across_queries():
    n = 10_000
    oracle = SyntheticOracle(
        {f"q{i}": SyntheticQuerySpec(rho=0.5, rho_zero=0.8) for i in range(n)}
    )
    rng = substream(41, "zs-rate")
    rate = sum(oracle.evaluate_zero_shot(Query(f"q{i}", 0), rng) for i in range(n)) / n
    assert abs(rate - 0.8) <= 0.012  # binomial 3 sigma at n = 10,000


def test_evaluation_counters(pool):
    oracle = _oracle(rho=0.5)
    query = Query("q0", 0)
    rng = substream(2, "count")
    for _ in range(5):
        oracle.evaluate(query, sample_balanced_context(pool, rng), rng)
    oracle.evaluate_zero_shot(query, rng)
    assert oracle.n_evaluations == 5
    assert oracle.n_zero_shot == 1
    oracle.reset_counters()
    assert oracle.n_evaluations == 0


def test_unknown_query_is_rejected(pool):
    oracle = _oracle(rho=0.5)
    rng = substream(2, "unknown")
    with pytest.raises(ConfigurationError):
        oracle.evaluate(Query("nope", 0), sample_balanced_context(pool, rng), rng)


def test_adapter_request_wire_format(pool):
    query = Query("q7", gold_label=1, payload="what is this?")
    context = sample_balanced_context(pool, substream(9, "wire"))
    options = ["alpha", "beta", "gamma"]
    request = adapter_request(query, context, options)
    assert request["query_id"] == "q7"
    assert request["query_text"] == "what is this?"
    assert request["label_options"] == options
    assert len(request["demos"]) == len(context.demos)
    for demo_entry, demo in zip(request["demos"], context.demos):
        assert demo_entry == {"input": demo.input, "label_string": options[demo.label]}


def test_adapter_response_scoring():
    query = Query("q7", gold_label=1)
    options = ["alpha", "beta", "gamma"]
    assert score_adapter_response({"predicted_label": "beta"}, query, options) is True
    assert score_adapter_response({"predicted_label": "alpha"}, query, options) is False
    with pytest.raises(ValueError):
        score_adapter_response({}, query, options)
    with pytest.raises(ValueError):
        score_adapter_response({"predicted_label": "delta"}, query, options)
    with pytest.raises(ConfigurationError):
        score_adapter_response({"predicted_label": "alpha"}, Query("q", 9), options)
    with pytest.raises(ConfigurationError):
        adapter_request(query, sample_balanced_context(make_synthetic_pool(3, 2), substream(1, "x")), ["only"])
