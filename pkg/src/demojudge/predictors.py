"""Router and judge contracts plus controllable synthetic references.

The router looks at the query alone and picks a difficulty stratum by decoding
three ordinal accept/reject heads in fixed precedence (tail head first).  The
judges score a specific (query, context) pair with an estimate of its success
probability.  The synthetic implementations wrap the ground-truth latent
function with configurable error — head flips keyed per query, bounded uniform
score noise keyed per pair — so every downstream guarantee can be exercised
under an exactly known error model.  Real encoder models plug in behind the
same two call surfaces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Mapping, Sequence

from .core import (
    AcceptanceThresholds,
    ConfigurationError,
    DemoContext,
    DemoPool,
    DifficultyLevel,
    JUDGED_LEVELS,
    Query,
    StratumBudgets,
)
from .oracle import SuccessOracle
from .rng import key_uniform, substream
from .stratify import QueryDifficultyProfile

__all__ = [
    "JudgeScore",
    "NoiseMode",
    "SyntheticJudgeConfig",
    "decode_ordinal",
    "OrdinalRouter",
    "oracle_router",
    "JudgeBank",
    "oracle_judges",
    "router_micro_accuracy",
    "TauGridPoint",
    "tau_grid_search",
    "select_taus",
    "tune_acceptance_thresholds",
    "DEFAULT_TAU",
]

JudgeScore = float

DEFAULT_TAU = 0.5  # fallback threshold for strata absent from the validation set

_HEAD_TAG = "router-head"
_JUDGE_TAG = "judge-noise"


def decode_ordinal(h1: bool, h2: bool, h3: bool) -> DifficultyLevel:
    """Decode three ordinal head decisions, hardest head first.

    ``h1`` accepts queries of the easiest stratum, ``h2`` accepts the easy
    half, ``h3`` accepts everything except the extreme tail.  Rejection by a
    later head overrides earlier heads.
    """
    if not h3:
        return DifficultyLevel.LX
    if not h2:
        return DifficultyLevel.L3
    if not h1:
        return DifficultyLevel.L2
    return DifficultyLevel.L1


class OrdinalRouter:
    """Three-head ordinal router over a known level assignment.

    Each head computes its true accept/reject decision from the query's
    reference level and then flips it with its configured flip rate, keyed
    deterministically by (seed, head, query_id): a given query is always
    routed the same way, and flips are independent across heads and queries.
    """

    def __init__(
        self,
        levels: Mapping[str, DifficultyLevel],
        flip_rate: float | Sequence[float] = 0.0,
        seed: int = 0,
        cost_per_call: float = 1.0,
    ):
        if isinstance(flip_rate, (int, float)):
            rates = (float(flip_rate),) * 3
        else:
            rates = tuple(float(r) for r in flip_rate)
            if len(rates) != 3:
                raise ConfigurationError(f"need one flip rate per head, got {len(rates)}")
        for rate in rates:
            if not (0.0 <= rate <= 1.0):
                raise ConfigurationError(f"flip rate must be in [0, 1], got {rate}")
        self._levels = dict(levels)
        self._rates = rates
        self._seed = seed
        self.cost_per_call = cost_per_call

    def _true_level(self, query: Query) -> DifficultyLevel:
        try:
            return self._levels[query.query_id]
        except KeyError:
            raise ConfigurationError(f"router has no level for query {query.query_id!r}") from None

    def heads(self, query: Query) -> tuple[bool, bool, bool]:
        level = self._true_level(query)
        truth = (
            level == DifficultyLevel.L1,
            level in (DifficultyLevel.L1, DifficultyLevel.L2),
            level != DifficultyLevel.LX,
        )
        decisions = []
        for index, (true_decision, rate) in enumerate(zip(truth, self._rates), start=1):
            flip = rate > 0.0 and key_uniform(_HEAD_TAG, self._seed, index, query.query_id) < rate
            decisions.append(true_decision != flip)
        return tuple(decisions)

    def route(self, query: Query) -> DifficultyLevel:
        return decode_ordinal(*self.heads(query))


def oracle_router(levels: Mapping[str, DifficultyLevel]) -> OrdinalRouter:
    """Noise-free router that always reproduces the reference levels."""
    return OrdinalRouter(levels, flip_rate=0.0)


class NoiseMode(Enum):
    UNIFORM_BOUNDED = "UNIFORM_BOUNDED"
    ZERO = "ZERO"


@dataclass(frozen=True, slots=True)
class SyntheticJudgeConfig:
    """Error model of a synthetic judge: max absolute score error and its shape."""

    epsilon: float = 0.0
    noise_mode: NoiseMode = NoiseMode.UNIFORM_BOUNDED
    bias: float = 0.0  # deliberate miscalibration; breaks the bounded-error contract

    def __post_init__(self) -> None:
        if not (0.0 <= self.epsilon < 1.0):
            raise ConfigurationError(f"epsilon must be in [0, 1), got {self.epsilon}")


class JudgeBank:
    """Per-stratum success-probability judges over a shared latent function.

    The reference score is ``clamp(latent + bias + noise, 0, 1)`` where noise
    is uniform on [-epsilon, +epsilon], keyed deterministically by the
    (level, query, context) triple: the same pair always gets the same score.
    With zero bias the score error never exceeds epsilon, which is the exact
    hypothesis under which the inference guarantees are checked.  No judge
    exists for the extreme tail.
    """

    def __init__(
        self,
        latent_fn: Callable[[Query, DemoContext], float],
        configs: Mapping[DifficultyLevel, SyntheticJudgeConfig],
        cost_per_call: Mapping[DifficultyLevel, float] | None = None,
        seed: int = 0,
    ):
        missing = [level for level in JUDGED_LEVELS if level not in configs]
        if missing:
            raise ConfigurationError(f"missing judge configs for {[m.name for m in missing]}")
        self._latent_fn = latent_fn
        self._configs = dict(configs)
        self._seed = seed
        self.cost_per_call = dict(cost_per_call or {level: 1.0 for level in JUDGED_LEVELS})

    def config_for(self, level: DifficultyLevel) -> SyntheticJudgeConfig:
        self._check_level(level)
        return self._configs[level]

    def score(self, level: DifficultyLevel, query: Query, context: DemoContext) -> JudgeScore:
        self._check_level(level)
        cfg = self._configs[level]
        latent = self._latent_fn(query, context)
        value = latent + cfg.bias
        if cfg.noise_mode is NoiseMode.UNIFORM_BOUNDED and cfg.epsilon > 0.0:
            u = key_uniform(_JUDGE_TAG, self._seed, level.name, query.query_id, *context.demo_ids())
            value += cfg.epsilon * (2.0 * u - 1.0)
        return min(1.0, max(0.0, value))

    @staticmethod
    def _check_level(level: DifficultyLevel) -> None:
        if level not in JUDGED_LEVELS:
            raise ValueError("no judge exists for the extreme-tail stratum")


def oracle_judges(
    latent_fn: Callable[[Query, DemoContext], float],
    cost_per_call: Mapping[DifficultyLevel, float] | None = None,
) -> JudgeBank:
    """Judges that return the latent success probability exactly."""
    zero = SyntheticJudgeConfig(epsilon=0.0, noise_mode=NoiseMode.ZERO)
    return JudgeBank(latent_fn, {level: zero for level in JUDGED_LEVELS}, cost_per_call)


def router_micro_accuracy(
    router: OrdinalRouter,
    queries: Sequence[Query],
    profiles: Sequence[QueryDifficultyProfile],
) -> float:
    """Fraction of queries routed to their profiled difficulty stratum."""
    if len(queries) != len(profiles) or not queries:
        raise ConfigurationError("need matching, nonempty queries and profiles")
    hits = 0
    for query, profile in zip(queries, profiles):
        if query.query_id != profile.query_id:
            raise ConfigurationError(
                f"query/profile mismatch: {query.query_id!r} vs {profile.query_id!r}"
            )
        hits += router.route(query) == profile.level
    return hits / len(queries)


@dataclass(frozen=True, slots=True)
class TauGridPoint:
    """Outcome of simulating one candidate threshold on the validation slice."""

    level: DifficultyLevel
    tau: float
    accuracy: float
    accepted_precision: float | None
    rejection_rate: float
    n_queries: int


def tau_grid_search(
    queries: Sequence[Query],
    profiles: Sequence[QueryDifficultyProfile],
    pool: DemoPool,
    judges: JudgeBank,
    budgets: StratumBudgets,
    oracle: SuccessOracle,
    grid_step: float = 0.05,
    seed: int = 0,
) -> list[TauGridPoint]:
    """Simulate the stop-on-acceptance loop for every grid threshold per stratum.

    Validation queries are grouped by their profiled level; for each level the
    full inference loop runs once per (tau, query) with the stream derived
    from (level, query) only — common random numbers across grid points — so
    thresholds with identical accept behavior get exactly identical accuracy
    and the tie-break is meaningful.  The search is deterministic and
    independent of iteration order.
    """
    from .inference import sample_and_judge  # deferred: inference builds on this module's types

    if not queries:
        raise ConfigurationError("empty validation set")
    if len(queries) != len(profiles):
        raise ConfigurationError("need one profile per validation query")
    if not (0.0 < grid_step < 1.0):
        raise ConfigurationError(f"grid_step must be in (0, 1), got {grid_step}")

    by_level: dict[DifficultyLevel, list[Query]] = {level: [] for level in JUDGED_LEVELS}
    for query, profile in zip(queries, profiles):
        if query.query_id != profile.query_id:
            raise ConfigurationError(
                f"query/profile mismatch: {query.query_id!r} vs {profile.query_id!r}"
            )
        if profile.level in by_level:
            by_level[profile.level].append(query)

    n_points = math.floor((1.0 - 1e-9) / grid_step)
    grid = [round(i * grid_step, 12) for i in range(1, n_points + 1)]
    results = []
    for level in JUDGED_LEVELS:
        members = by_level[level]
        if not members:
            continue
        k = budgets.for_level(level)
        for tau in grid:
            successes = 0
            accepted = 0
            accepted_successes = 0
            for query in members:
                rng = substream(seed, "tune", level.name, query.query_id)
                outcome = sample_and_judge(
                    query, level, pool, judges, k, tau, oracle, rng, trace="none"
                )
                successes += outcome.final_success
                if outcome.accepted_index is not None:
                    accepted += 1
                    accepted_successes += outcome.final_success
            n = len(members)
            results.append(
                TauGridPoint(
                    level=level,
                    tau=tau,
                    accuracy=successes / n,
                    accepted_precision=(accepted_successes / accepted) if accepted else None,
                    rejection_rate=(n - accepted) / n,
                    n_queries=n,
                )
            )
    return results


def select_taus(points: Sequence[TauGridPoint]) -> AcceptanceThresholds:
    """Reduce grid-search results to per-stratum thresholds.

    Accuracy is maximized per stratum; ties break toward the smallest
    threshold (fewer expected attempts).  Strata with no grid points keep the
    documented default of 0.5.
    """
    best: dict[DifficultyLevel, TauGridPoint] = {}
    for point in points:
        incumbent = best.get(point.level)
        if (
            incumbent is None
            or point.accuracy > incumbent.accuracy
            or (point.accuracy == incumbent.accuracy and point.tau < incumbent.tau)
        ):
            best[point.level] = point
    taus = {level: DEFAULT_TAU for level in JUDGED_LEVELS}
    for level, point in best.items():
        taus[level] = point.tau
    return AcceptanceThresholds(
        tau_l1=taus[DifficultyLevel.L1],
        tau_l2=taus[DifficultyLevel.L2],
        tau_l3=taus[DifficultyLevel.L3],
    )


def tune_acceptance_thresholds(
    queries: Sequence[Query],
    profiles: Sequence[QueryDifficultyProfile],
    pool: DemoPool,
    judges: JudgeBank,
    budgets: StratumBudgets,
    oracle: SuccessOracle,
    grid_step: float = 0.05,
    seed: int = 0,
) -> AcceptanceThresholds:
    """Pick per-stratum thresholds maximizing simulated end-task accuracy."""
    points = tau_grid_search(queries, profiles, pool, judges, budgets, oracle, grid_step, seed)
    return select_taus(points)
