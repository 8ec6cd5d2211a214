"""Empirical verification of every closed-form guarantee, as one suite.

Each check either simulates the relevant stochastic model at scale and
compares measured frequencies against the exact formula or bound, or runs the
real pipeline and asserts the zero-tolerance guarantees record by record.
The suite emits one pass/fail row per check; it is the machinery behind the
``verify-theory`` CLI command.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .budgeting import (
    budget_for_miss,
    coverage_probability,
    expected_attempts_given_accepted,
)
from .config import RunConfig
from .core import (
    AcceptanceThresholds,
    DemoPool,
    Demonstration,
    DifficultyLevel,
    Query,
    RiskTag,
    StratumBudgets,
    Thresholds,
    make_synthetic_pool,
    sample_balanced_context,
)
from .inference import run_batch
from .oracle import SyntheticOracle, SyntheticQuerySpec
from .pipeline import build_judges, build_pool, build_population, build_oracle, build_router, derive_seed
from .predictors import oracle_judges, oracle_router
from .rng import substream
from .stratify import estimate_success_rate, hoeffding_bound, mislabel_bound

__all__ = ["CheckResult", "run_verification", "manifest_rows", "manifest_text"]


@dataclass(frozen=True, slots=True)
class CheckResult:
    name: str
    passed: bool
    observed: float | None
    bound: float | None
    detail: str


def _two_stage_outcomes(
    rng: np.random.Generator, rho: float, concentration: float, shape: tuple[int, ...]
) -> np.ndarray:
    """Vectorized draws from the synthetic model: latent Beta, then Bernoulli."""
    a = concentration * rho
    b = concentration * (1.0 - rho)
    latent = rng.beta(a, b, size=shape)
    return rng.random(size=shape) < latent


def check_sampler_uniformity(seed: int, draws: int = 120_000) -> CheckResult:
    """Chi-squared uniformity over a fully enumerable context space."""
    pool = DemoPool(
        {
            0: tuple(Demonstration(f"a{i}", 0) for i in range(2)),
            1: (Demonstration("b0", 1),),
            2: (Demonstration("c0", 2),),
        }
    )
    rng = substream(seed, "verify", "sampler-uniformity")
    counts: dict[tuple[str, ...], int] = {}
    for _ in range(draws):
        ids = sample_balanced_context(pool, rng).demo_ids()
        counts[ids] = counts.get(ids, 0) + 1
    n_cells = pool.n_contexts()
    observed = [counts.get(key, 0) for key in counts]
    if len(counts) < n_cells:
        observed += [0] * (n_cells - len(counts))
    result = stats.chisquare(observed)
    passed = bool(result.pvalue >= 0.001)
    return CheckResult(
        name="sampler_uniformity",
        passed=passed,
        observed=float(result.pvalue),
        bound=0.001,
        detail=f"{n_cells} contexts, {draws} draws, chi2 p-value {result.pvalue:.4f}",
    )


def check_coverage_closed_form(seed: int, n_sets: int = 100_000) -> CheckResult:
    """Monte-Carlo miss frequency against (1 - rho)**K, within 3-sigma."""
    rng = substream(seed, "verify", "coverage")
    worst = 0.0
    detail = []
    for rho in (0.1, 0.3, 0.5):
        for k in (5, 20):
            successes = _two_stage_outcomes(rng, rho, 4.0, (n_sets, k))
            miss_freq = float(np.mean(~successes.any(axis=1)))
            expected = 1.0 - coverage_probability(rho, k)
            sigma = max(np.sqrt(expected * (1.0 - expected) / n_sets), 1e-12)
            pull = abs(miss_freq - expected) / sigma
            worst = max(worst, pull)
            detail.append(f"rho={rho} K={k}: {miss_freq:.5f} vs {expected:.5f} ({pull:.2f} sigma)")
    return CheckResult(
        name="coverage_closed_form",
        passed=worst <= 3.0,
        observed=worst,
        bound=3.0,
        detail="; ".join(detail),
    )


def check_budget_minimality() -> CheckResult:
    """budget_for_miss returns the minimal K meeting the miss target."""
    failures = []
    for rho in np.arange(0.05, 0.96, 0.05):
        rho = round(float(rho), 2)
        for delta in (0.001, 0.01, 0.05, 0.2, 0.5):
            k = budget_for_miss(rho, delta)
            if (1.0 - rho) ** k > delta * (1.0 + 1e-9):
                failures.append(f"rho={rho} delta={delta}: K={k} misses target")
            if k > 1 and (1.0 - rho) ** (k - 1) <= delta * (1.0 - 1e-9):
                failures.append(f"rho={rho} delta={delta}: K={k} not minimal")
    return CheckResult(
        name="budget_minimality",
        passed=not failures,
        observed=float(len(failures)),
        bound=0.0,
        detail="; ".join(failures) if failures else "minimal on the whole grid",
    )


def check_estimator_concentration(seed: int, n_estimations: int = 50_000) -> CheckResult:
    """Deviation frequency of the T-trial estimate never exceeds the two-sided bound."""
    rng = substream(seed, "verify", "concentration")
    failures = []
    worst_ratio = 0.0
    for trials in (10, 20, 50):
        for rho in (0.1, 0.3, 0.5, 0.75):
            outcomes = _two_stage_outcomes(rng, rho, 4.0, (n_estimations, trials))
            rho_hat = outcomes.mean(axis=1)
            for eps in (0.1, 0.15, 0.2):
                freq = float(np.mean(np.abs(rho_hat - rho) >= eps))
                bound = hoeffding_bound(trials, eps)
                worst_ratio = max(worst_ratio, freq / bound if bound else np.inf)
                if freq > bound:
                    failures.append(f"T={trials} rho={rho} eps={eps}: {freq:.4f} > {bound:.4f}")
    return CheckResult(
        name="estimator_concentration",
        passed=not failures,
        observed=worst_ratio,
        bound=1.0,
        detail="; ".join(failures) if failures else
        f"worst observed/bound ratio {worst_ratio:.3f} over the grid",
    )


def check_estimator_concentration_end_to_end(seed: int, n_estimations: int = 3_000) -> CheckResult:
    """Same bound, measured through the real trial/estimate path."""
    pool = make_synthetic_pool(3, 40)
    thresholds = Thresholds()
    trials = 20
    rho = 0.5
    specs = {
        f"v{i:05d}": SyntheticQuerySpec(rho=rho, concentration=4.0) for i in range(n_estimations)
    }
    oracle = SyntheticOracle(specs)
    deviations = np.empty(n_estimations)
    for i, query_id in enumerate(specs):
        query = Query(query_id=query_id, gold_label=0)
        rng = substream(seed, "verify", "e2e-concentration", query_id)
        profile = estimate_success_rate(query, pool, trials, oracle, rng, thresholds)
        deviations[i] = abs(profile.rho_hat - rho)
    failures = []
    worst_ratio = 0.0
    for eps in (0.1, 0.15, 0.2):
        freq = float(np.mean(deviations >= eps))
        bound = hoeffding_bound(trials, eps)
        worst_ratio = max(worst_ratio, freq / bound)
        if freq > bound:
            failures.append(f"eps={eps}: {freq:.4f} > {bound:.4f}")
    return CheckResult(
        name="estimator_concentration_end_to_end",
        passed=not failures,
        observed=worst_ratio,
        bound=1.0,
        detail="; ".join(failures) if failures else
        f"T={trials}, rho={rho}, {n_estimations} estimations through the trial path",
    )


def check_threshold_crossing(seed: int, n_estimations: int = 50_000) -> CheckResult:
    """One-sided crossing frequency with margin never exceeds exp(-2*T*margin^2)."""
    rng = substream(seed, "verify", "crossing")
    trials = 20
    threshold = 0.3
    margin = 0.15
    bound = mislabel_bound(trials, margin)
    failures = []
    observed = []
    for rho, crosses in ((threshold + margin, "below"), (threshold - margin, "above")):
        outcomes = _two_stage_outcomes(rng, rho, 4.0, (n_estimations, trials))
        rho_hat = outcomes.mean(axis=1)
        freq = float(np.mean(rho_hat < threshold if crosses == "below" else rho_hat >= threshold))
        observed.append(freq)
        if freq > bound:
            failures.append(f"rho={rho}: crossing freq {freq:.4f} > {bound:.4f}")
    return CheckResult(
        name="threshold_crossing_margin",
        passed=not failures,
        observed=max(observed),
        bound=bound,
        detail="; ".join(failures) if failures else
        f"crossing freqs {observed[0]:.4f}/{observed[1]:.4f} vs bound {bound:.4f}",
    )


def _lemma_run(cfg: RunConfig):
    population = build_population(cfg, "verify", cfg.verify.n_queries)
    pool = build_pool(cfg)
    oracle = build_oracle(population)
    router = build_router(cfg, population)
    judges = build_judges(cfg, oracle)
    taus = cfg.acceptance if cfg.acceptance is not None else AcceptanceThresholds()
    queries = [query for query, _ in population]
    outcomes = run_batch(
        queries, pool, router, judges, cfg.budgets, taus, oracle,
        seed=derive_seed(cfg.seed, "verify-run"),
        parallelism=cfg.parallelism,
        trace="full",
    )
    return outcomes, oracle, taus


def check_guarantees_on_run(cfg: RunConfig) -> list[CheckResult]:
    """Zero-tolerance guarantees over a full pipeline run at the configured judge error."""
    outcomes, oracle, taus = _lemma_run(cfg)
    eps = {level: cfg.judge.epsilon_for(level) for level in
           (DifficultyLevel.L1, DifficultyLevel.L2, DifficultyLevel.L3)}
    bias = abs(cfg.judge.bias)
    n_accept_checked = 0
    n_reject_checked = 0
    accept_violations = 0
    reject_violations = 0
    budget_violations = 0
    for outcome in outcomes:
        if outcome.routed_level == DifficultyLevel.LX:
            if outcome.attempts != 0:
                budget_violations += 1
            continue
        k = cfg.budgets.for_level(outcome.routed_level)
        tau = taus.for_level(outcome.routed_level)
        tol = eps[outcome.routed_level] + bias
        if outcome.attempts > k or outcome.attempts < 1:
            budget_violations += 1
        if outcome.tag == RiskTag.NO_GOOD_DEMO:
            n_reject_checked += 1
            if outcome.attempts != k:
                budget_violations += 1
            for record in outcome.candidate_trace:
                if record.latent_p is not None and record.latent_p >= tau + tol:
                    reject_violations += 1
        else:
            n_accept_checked += 1
            accepted = outcome.candidate_trace[-1]
            if accepted.latent_p is not None and accepted.latent_p < tau - tol:
                accept_violations += 1
    results = [
        CheckResult(
            name="accept_floor_zero_violations",
            passed=accept_violations == 0,
            observed=float(accept_violations),
            bound=0.0,
            detail=f"{n_accept_checked} accepted runs, tolerance eps+|bias|",
        ),
        CheckResult(
            name="reject_soundness_zero_violations",
            passed=reject_violations == 0,
            observed=float(reject_violations),
            bound=0.0,
            detail=f"{n_reject_checked} exhausted runs, all candidates below tau+eps",
        ),
        CheckResult(
            name="single_oracle_call",
            passed=oracle.n_evaluations == len(outcomes),
            observed=float(oracle.n_evaluations),
            bound=float(len(outcomes)),
            detail=f"{oracle.n_evaluations} oracle calls for {len(outcomes)} queries",
        ),
        CheckResult(
            name="budget_and_tag_invariants",
            passed=budget_violations == 0,
            observed=float(budget_violations),
            bound=0.0,
            detail="attempts within budget, exhausted runs consume it exactly",
        ),
    ]
    return results


def check_expected_attempts(seed: int, n_queries: int = 20_000) -> CheckResult:
    """Mean attempts over accepted runs matches the truncated-geometric prediction."""
    acceptance = 0.5
    k = 20
    rho = 0.5
    pool = make_synthetic_pool(3, 40)
    specs = {f"g{i:05d}": SyntheticQuerySpec(rho=rho, concentration=4.0) for i in range(n_queries)}
    oracle = SyntheticOracle(specs)
    judges = oracle_judges(oracle.latent_success_probability)
    levels = {query_id: DifficultyLevel.L2 for query_id in specs}
    router = oracle_router(levels)
    budgets = StratumBudgets(k_l1=k, k_l2=k, k_l3=k)
    # For Beta(2, 2) the median is 1/2, so tau = 0.5 accepts candidates at rate 0.5.
    taus = AcceptanceThresholds(tau_l1=0.5, tau_l2=0.5, tau_l3=0.5)
    queries = [Query(query_id=query_id, gold_label=0) for query_id in specs]
    outcomes = run_batch(
        queries, pool, router, judges, budgets, taus, oracle,
        seed=derive_seed(seed, "verify-attempts"), trace="none",
    )
    attempts = [o.attempts for o in outcomes if o.accepted_index is not None]
    measured = float(np.mean(attempts))
    predicted = expected_attempts_given_accepted(acceptance, k)
    rel = abs(measured - predicted) / predicted
    return CheckResult(
        name="expected_attempts_formula",
        passed=rel <= 0.02,
        observed=measured,
        bound=predicted,
        detail=f"{len(attempts)} accepted runs, relative error {rel:.4f} (limit 0.02)",
    )


def run_verification(cfg: RunConfig) -> list[CheckResult]:
    seed = derive_seed(cfg.seed, "verify")
    results = [
        check_sampler_uniformity(seed),
        check_coverage_closed_form(seed),
        check_budget_minimality(),
        check_estimator_concentration(seed),
        check_estimator_concentration_end_to_end(seed),
        check_threshold_crossing(seed),
    ]
    results.extend(check_guarantees_on_run(cfg))
    results.append(check_expected_attempts(seed))
    return results


def manifest_rows(results: list[CheckResult]) -> list[dict]:
    return [
        {
            "check": r.name,
            "passed": r.passed,
            "observed": r.observed,
            "bound": r.bound,
            "detail": r.detail,
        }
        for r in results
    ]


def manifest_text(results: list[CheckResult]) -> str:
    lines = []
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"[{status}] {r.name}: {r.detail}")
    n_failed = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_failed}/{len(results)} checks passed")
    lines.append("")
    return "\n".join(lines)
