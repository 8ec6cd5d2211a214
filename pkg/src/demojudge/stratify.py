"""Offline difficulty estimation and supervision construction.

Each training query is probed with T independent random contexts; the mean
outcome is its empirical success rate, which fixed thresholds map to one of
four difficulty levels.  Trials of the three judged levels become per-level
judge training sets, the level labels become the router training set, and the
extreme tail contributes routing supervision only.  The concentration
functions quantify how trustworthy the T-trial estimate is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import (
    ConfigurationError,
    DemoContext,
    DemoPool,
    DifficultyLevel,
    Query,
    Thresholds,
    sample_balanced_context,
)
from .oracle import SuccessIndicator, SuccessOracle

__all__ = [
    "TrialRecord",
    "QueryDifficultyProfile",
    "SupervisionBundle",
    "assign_level",
    "estimate_success_rate",
    "build_supervision",
    "hoeffding_bound",
    "mislabel_bound",
    "trials_needed",
]


@dataclass(frozen=True, slots=True)
class TrialRecord:
    """One random-context probe of a query."""

    query_id: str
    context: DemoContext
    outcome: SuccessIndicator
    trial_index: int


@dataclass(frozen=True, slots=True)
class QueryDifficultyProfile:
    """T-trial difficulty estimate of one query."""

    query_id: str
    trials: tuple[TrialRecord, ...]
    rho_hat: float
    level: DifficultyLevel

    def __post_init__(self) -> None:
        n = len(self.trials)
        if n == 0:
            raise ConfigurationError("profile needs at least one trial")
        if sorted(t.trial_index for t in self.trials) != list(range(n)):
            raise ConfigurationError("trial indices must be exactly 0..T-1")
        successes = sum(1 for t in self.trials if t.outcome)
        if self.rho_hat != successes / n:
            raise ConfigurationError(
                f"rho_hat {self.rho_hat} != {successes}/{n} from the trials"
            )


def assign_level(rho_hat: float, thresholds: Thresholds) -> DifficultyLevel:
    """Map a success rate to its difficulty stratum (lower edges inclusive)."""
    if not (0.0 <= rho_hat <= 1.0):
        raise ConfigurationError(f"rho_hat must be in [0, 1], got {rho_hat}")
    if rho_hat >= thresholds.alpha:
        return DifficultyLevel.L1
    if rho_hat >= thresholds.beta:
        return DifficultyLevel.L2
    if rho_hat >= thresholds.gamma:
        return DifficultyLevel.L3
    return DifficultyLevel.LX


def estimate_success_rate(
    query: Query,
    pool: DemoPool,
    trials: int,
    oracle: SuccessOracle,
    rng: np.random.Generator,
    thresholds: Thresholds,
) -> QueryDifficultyProfile:
    """Probe a query with ``trials`` i.i.d. random contexts and grade it."""
    if trials < 1:
        raise ConfigurationError(f"need at least one trial, got {trials}")
    records = []
    successes = 0
    for t in range(trials):
        context = sample_balanced_context(pool, rng, sample_index=t)
        outcome = oracle.evaluate(query, context, rng).realized
        successes += outcome
        records.append(
            TrialRecord(query_id=query.query_id, context=context, outcome=outcome, trial_index=t)
        )
    rho_hat = successes / trials
    return QueryDifficultyProfile(
        query_id=query.query_id,
        trials=tuple(records),
        rho_hat=rho_hat,
        level=assign_level(rho_hat, thresholds),
    )


@dataclass(frozen=True)
class SupervisionBundle:
    """The four supervised datasets distilled from difficulty profiles.

    ``route_set`` holds (query_id, level) for every query; ``judge_sets``
    holds ((query_id, context), outcome) pairs partitioned by the owning
    query's level for the three judged levels.  Trials of extreme-tail
    queries are dropped: no judge is ever trained for that stratum.
    """

    route_set: tuple[tuple[str, DifficultyLevel], ...]
    judge_sets: Mapping[DifficultyLevel, tuple[tuple[tuple[str, DemoContext], SuccessIndicator], ...]]


def build_supervision(profiles: Sequence[QueryDifficultyProfile]) -> SupervisionBundle:
    """Partition profile trials into routing and per-level judge supervision."""
    if not profiles:
        raise ConfigurationError("no profiles given")
    seen: set[str] = set()
    route = []
    judge: dict[DifficultyLevel, list] = {
        DifficultyLevel.L1: [],
        DifficultyLevel.L2: [],
        DifficultyLevel.L3: [],
    }
    for profile in profiles:
        if profile.query_id in seen:
            raise ConfigurationError(f"duplicate query_id {profile.query_id!r}")
        seen.add(profile.query_id)
        route.append((profile.query_id, profile.level))
        if profile.level == DifficultyLevel.LX:
            continue
        bucket = judge[profile.level]
        for trial in profile.trials:
            bucket.append(((trial.query_id, trial.context), trial.outcome))
    return SupervisionBundle(
        route_set=tuple(route),
        judge_sets={level: tuple(pairs) for level, pairs in judge.items()},
    )


def hoeffding_bound(trials: int, epsilon: float) -> float:
    """Two-sided bound on P(|estimate - truth| >= epsilon), clamped to 1."""
    if trials < 1:
        raise ConfigurationError(f"trials must be >= 1, got {trials}")
    if epsilon < 0.0:
        raise ConfigurationError(f"epsilon must be >= 0, got {epsilon}")
    return min(1.0, 2.0 * math.exp(-2.0 * trials * epsilon * epsilon))


def mislabel_bound(trials: int, margin: float) -> float:
    """One-sided bound on crossing a threshold the truth clears by ``margin``."""
    if trials < 1:
        raise ConfigurationError(f"trials must be >= 1, got {trials}")
    if margin < 0.0:
        raise ConfigurationError(f"margin must be >= 0, got {margin}")
    return math.exp(-2.0 * trials * margin * margin)


def trials_needed(margin: float, delta: float, n_queries: int | None = None) -> int:
    """Trials per query so a margin-``margin`` threshold crossing has probability <= delta.

    With ``n_queries`` the guarantee holds simultaneously for all queries via
    a union bound.  Always at least 1.
    """
    if margin <= 0.0:
        raise ConfigurationError(f"margin must be > 0, got {margin}")
    if not (0.0 < delta <= 1.0):
        raise ConfigurationError(f"delta must be in (0, 1], got {delta}")
    scale = 1 if n_queries is None else n_queries
    if scale < 1:
        raise ConfigurationError(f"n_queries must be >= 1, got {n_queries}")
    raw = math.log(scale / delta) / (2.0 * margin * margin)
    return max(1, math.ceil(raw))


def profiles_to_records(profiles: Iterable[QueryDifficultyProfile]) -> list[dict]:
    """Flatten profiles to their persistable summary rows."""
    return [
        {"query_id": p.query_id, "rho_hat": p.rho_hat, "level": p.level.name}
        for p in profiles
    ]


def trials_to_records(profiles: Iterable[QueryDifficultyProfile]) -> list[dict]:
    """Flatten profile trials to replayable trial-log rows."""
    rows = []
    for profile in profiles:
        for trial in profile.trials:
            rows.append(
                {
                    "query_id": trial.query_id,
                    "trial_index": trial.trial_index,
                    "demo_ids": list(trial.context.demo_ids()),
                    "outcome": int(trial.outcome),
                }
            )
    return rows
