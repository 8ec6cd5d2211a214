"""Test-time workflow: route, then budgeted stop-on-acceptance sample-and-judge.

Per query: the router picks a stratum.  Extreme-tail queries skip judging
entirely — one random context, one target-oracle call, HARD_QUERY tag.  Judged
queries draw candidates one at a time; the first candidate whose judge score
clears the stratum threshold is accepted, the loop stops, and the target
oracle is consulted once on that context.  If the whole budget is rejected,
a fresh random context is drawn (never one of the rejected candidates), the
oracle is consulted once on it, and the query is tagged NO_GOOD_DEMO.  Every
path costs exactly one target-oracle evaluation.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .core import (
    AcceptanceThresholds,
    ConfigurationError,
    DemoContext,
    DemoPool,
    DifficultyLevel,
    Query,
    RiskTag,
    StratumBudgets,
    sample_balanced_context,
)
from .oracle import SuccessIndicator, SuccessOracle
from .predictors import JudgeBank, OrdinalRouter
from .rng import substream

__all__ = [
    "TraceMode",
    "CandidateRecord",
    "InferenceOutcome",
    "sample_and_judge",
    "run_query",
    "run_batch",
    "outcome_record",
]

TraceMode = Literal["full", "summary", "none"]


@dataclass(frozen=True, slots=True)
class CandidateRecord:
    """Audit row for one judged candidate."""

    latent_p: float | None
    score: float
    accepted: bool


@dataclass(frozen=True, slots=True)
class InferenceOutcome:
    """Everything observable about one query's trip through the pipeline.

    ``attempts`` counts judge evaluations; ``accepted_index`` is the 1-based
    candidate number that was accepted, absent on tagged queries.
    """

    query_id: str
    routed_level: DifficultyLevel
    tag: RiskTag
    attempts: int
    accepted_index: int | None
    used_context: DemoContext
    final_success: SuccessIndicator
    candidate_trace: tuple[CandidateRecord, ...] = ()

    def __post_init__(self) -> None:
        if self.routed_level == DifficultyLevel.LX:
            if self.tag != RiskTag.HARD_QUERY:
                raise ConfigurationError("extreme-tail routing must carry HARD_QUERY")
        elif self.tag == RiskTag.HARD_QUERY:
            raise ConfigurationError("HARD_QUERY is only valid on extreme-tail routing")
        if self.tag == RiskTag.HARD_QUERY:
            if self.attempts != 0 or self.accepted_index is not None:
                raise ConfigurationError("HARD_QUERY outcomes perform no judged attempts")
        elif self.tag == RiskTag.NO_GOOD_DEMO:
            if self.accepted_index is not None:
                raise ConfigurationError("NO_GOOD_DEMO outcomes accept no candidate")
            if self.attempts < 1:
                raise ConfigurationError("NO_GOOD_DEMO requires an exhausted budget")
        else:
            if self.accepted_index is None:
                raise ConfigurationError("untagged outcomes must accept a candidate")
            if self.attempts != self.accepted_index:
                raise ConfigurationError(
                    f"attempts ({self.attempts}) must equal the accepted index "
                    f"({self.accepted_index}) under stop-on-acceptance"
                )


def sample_and_judge(
    query: Query,
    level: DifficultyLevel,
    pool: DemoPool,
    judges: JudgeBank,
    k: int,
    tau: float,
    oracle: SuccessOracle,
    rng: np.random.Generator,
    trace: TraceMode = "full",
) -> InferenceOutcome:
    """Stop-on-acceptance loop at a fixed stratum, budget and threshold."""
    if k < 1:
        raise ConfigurationError(f"budget must be >= 1, got {k}")
    latent_fn = getattr(oracle, "latent_success_probability", None)
    keep_full = trace == "full" and latent_fn is not None
    records: list[CandidateRecord] = []
    for i in range(1, k + 1):
        candidate = sample_balanced_context(pool, rng, sample_index=i - 1)
        score = judges.score(level, query, candidate)
        accepted = score >= tau
        if trace != "none":
            latent = latent_fn(query, candidate) if keep_full else None
            records.append(CandidateRecord(latent_p=latent, score=score, accepted=accepted))
        if accepted:
            outcome = oracle.evaluate(query, candidate, rng)
            return InferenceOutcome(
                query_id=query.query_id,
                routed_level=level,
                tag=RiskTag.NONE,
                attempts=i,
                accepted_index=i,
                used_context=candidate,
                final_success=outcome.realized,
                candidate_trace=tuple(records),
            )
    # Budget exhausted: answer anyway with a fresh random draw, flagged.
    fallback = sample_balanced_context(pool, rng, sample_index=0)
    outcome = oracle.evaluate(query, fallback, rng)
    return InferenceOutcome(
        query_id=query.query_id,
        routed_level=level,
        tag=RiskTag.NO_GOOD_DEMO,
        attempts=k,
        accepted_index=None,
        used_context=fallback,
        final_success=outcome.realized,
        candidate_trace=tuple(records),
    )


def run_query(
    query: Query,
    pool: DemoPool,
    router: OrdinalRouter,
    judges: JudgeBank,
    budgets: StratumBudgets,
    taus: AcceptanceThresholds,
    oracle: SuccessOracle,
    rng: np.random.Generator,
    trace: TraceMode = "full",
) -> InferenceOutcome:
    """Route one query and run its stratum's policy; exactly one oracle call."""
    level = router.route(query)
    if level == DifficultyLevel.LX:
        context = sample_balanced_context(pool, rng, sample_index=0)
        outcome = oracle.evaluate(query, context, rng)
        return InferenceOutcome(
            query_id=query.query_id,
            routed_level=level,
            tag=RiskTag.HARD_QUERY,
            attempts=0,
            accepted_index=None,
            used_context=context,
            final_success=outcome.realized,
            candidate_trace=(),
        )
    return sample_and_judge(
        query, level, pool, judges, budgets.for_level(level), taus.for_level(level),
        oracle, rng, trace,
    )


def run_batch(
    queries: Sequence[Query],
    pool: DemoPool,
    router: OrdinalRouter,
    judges: JudgeBank,
    budgets: StratumBudgets,
    taus: AcceptanceThresholds,
    oracle: SuccessOracle,
    seed: int,
    parallelism: int = 1,
    trace: TraceMode = "summary",
) -> list[InferenceOutcome]:
    """Run a batch of queries with per-query derived streams.

    Each query's stream is derived from (seed, query_id), never from shared
    mutable state, so results are identical for any worker count and match
    input order exactly.
    """
    if parallelism < 1:
        raise ConfigurationError(f"parallelism must be >= 1, got {parallelism}")

    def one(query: Query) -> InferenceOutcome:
        rng = substream(seed, "query", query.query_id)
        return run_query(query, pool, router, judges, budgets, taus, oracle, rng, trace)

    if parallelism == 1 or len(queries) < 2:
        return [one(q) for q in queries]
    with ThreadPoolExecutor(max_workers=parallelism) as executor:
        return list(executor.map(one, queries))


def outcome_record(outcome: InferenceOutcome) -> dict:
    """Flatten an outcome to its persistable log row."""
    return {
        "query_id": outcome.query_id,
        "routed_level": outcome.routed_level.name,
        "tag": outcome.tag.value,
        "attempts": outcome.attempts,
        "accepted_index": outcome.accepted_index,
        "success": int(outcome.final_success),
    }
