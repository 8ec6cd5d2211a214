"""Synthetic populations, per-stratum metrics, and the run report.

Populations are drawn from a mixture over difficulty strata: each query gets a
stratum from the mixture weights, a true success rate from that stratum's
distribution (whose support must lie inside the stratum's threshold interval),
a zero-shot rate from the configured model, and a gold label.  Reports
aggregate inference outcomes two ways — by the stratum implied by the true
success rate ("oracle" grouping) and by the stratum the router chose
("routed" grouping) — plus risk-tag statistics.  Cells without support render
as N/A rather than zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import (
    ConfigurationError,
    DemoPool,
    DifficultyLevel,
    Query,
    RiskTag,
    Thresholds,
    sample_balanced_context,
)
from .inference import InferenceOutcome
from .oracle import SuccessOracle, SyntheticQuerySpec
from .rng import substream
from .stratify import assign_level

__all__ = [
    "RhoDistribution",
    "RhoZeroModel",
    "StratumSpec",
    "PopulationSpec",
    "generate_population",
    "oracle_levels",
    "random_success_by_query",
    "stratum_success_table",
    "StratumCells",
    "TagStats",
    "StratumReport",
    "pipeline_report",
    "report_records",
    "report_text",
    "NA_TOKEN",
]

NA_TOKEN = "N/A"

_LEVELS = (DifficultyLevel.L1, DifficultyLevel.L2, DifficultyLevel.L3, DifficultyLevel.LX)


@dataclass(frozen=True, slots=True)
class RhoDistribution:
    """Distribution of true success rates within one stratum.

    kind "point":   a single value (``value``)
    kind "uniform": uniform on [low, high)
    kind "points":  finite mixture over ``values`` with ``weights``
    """

    kind: str
    value: float | None = None
    low: float | None = None
    high: float | None = None
    values: tuple[float, ...] | None = None
    weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind == "point":
            if self.value is None:
                raise ConfigurationError("point distribution needs 'value'")
        elif self.kind == "uniform":
            if self.low is None or self.high is None or not (self.low < self.high):
                raise ConfigurationError("uniform distribution needs low < high")
        elif self.kind == "points":
            if not self.values:
                raise ConfigurationError("points distribution needs 'values'")
            weights = self.weights or tuple(1.0 / len(self.values) for _ in self.values)
            if len(weights) != len(self.values) or abs(sum(weights) - 1.0) > 1e-9:
                raise ConfigurationError("points weights must match values and sum to 1")
            object.__setattr__(self, "weights", tuple(weights))
        else:
            raise ConfigurationError(f"unknown rho distribution kind {self.kind!r}")

    def support(self) -> tuple[float, float]:
        """Closed support bounds [lo, hi]."""
        if self.kind == "point":
            return (self.value, self.value)
        if self.kind == "uniform":
            return (self.low, self.high)
        return (min(self.values), max(self.values))

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "point":
            return np.full(n, self.value)
        if self.kind == "uniform":
            return self.low + (self.high - self.low) * rng.random(n)
        return rng.choice(np.asarray(self.values), size=n, p=np.asarray(self.weights))


@dataclass(frozen=True, slots=True)
class RhoZeroModel:
    """How zero-shot success rates relate to random-context success rates.

    kind "constant": every query gets ``value``
    kind "scaled":   rho_zero = clip(factor * rho, 0, 1)
    kind "uniform":  uniform on [low, high), independent of rho
    """

    kind: str = "scaled"
    value: float | None = None
    factor: float | None = 0.8
    low: float | None = None
    high: float | None = None

    def __post_init__(self) -> None:
        if self.kind == "constant":
            if self.value is None or not (0.0 <= self.value <= 1.0):
                raise ConfigurationError("constant rho_zero needs value in [0, 1]")
        elif self.kind == "scaled":
            if self.factor is None or self.factor < 0.0:
                raise ConfigurationError("scaled rho_zero needs factor >= 0")
        elif self.kind == "uniform":
            if (
                self.low is None
                or self.high is None
                or not (0.0 <= self.low < self.high <= 1.0)
            ):
                raise ConfigurationError("uniform rho_zero needs 0 <= low < high <= 1")
        else:
            raise ConfigurationError(f"unknown rho_zero kind {self.kind!r}")

    def draw(self, rng: np.random.Generator, rhos: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.full(len(rhos), self.value)
        if self.kind == "scaled":
            return np.clip(self.factor * rhos, 0.0, 1.0)
        return self.low + (self.high - self.low) * rng.random(len(rhos))


@dataclass(frozen=True, slots=True)
class StratumSpec:
    weight: float
    rho: RhoDistribution

    def __post_init__(self) -> None:
        if self.weight < 0.0:
            raise ConfigurationError(f"stratum weight must be >= 0, got {self.weight}")


@dataclass(frozen=True)
class PopulationSpec:
    """Recipe for a synthetic query population."""

    strata: Mapping[DifficultyLevel, StratumSpec]
    size: int
    seed: int
    concentration: float = 4.0
    rho_zero: RhoZeroModel = RhoZeroModel()

    def __post_init__(self) -> None:
        if self.size < 0:
            raise ConfigurationError(f"population size must be >= 0, got {self.size}")
        if self.concentration <= 0.0:
            raise ConfigurationError(f"concentration must be > 0, got {self.concentration}")
        missing = [level for level in _LEVELS if level not in self.strata]
        if missing:
            raise ConfigurationError(f"missing strata {[m.name for m in missing]}")
        total = sum(s.weight for s in self.strata.values())
        # Published composition tables are rounded; tolerate that and renormalize.
        if abs(total - 1.0) > 0.01:
            raise ConfigurationError(f"stratum weights must sum to 1, got {total}")

    def validate_supports(self, thresholds: Thresholds) -> None:
        """Every stratum's rho support must lie inside its threshold interval."""
        for level, spec in self.strata.items():
            lo, hi = thresholds.interval(level)
            s_lo, s_hi = spec.rho.support()
            top_ok = s_hi <= 1.0 if level == DifficultyLevel.L1 else s_hi <= hi
            if not (s_lo >= lo and top_ok):
                raise ConfigurationError(
                    f"{level.name} rho support [{s_lo}, {s_hi}] outside its "
                    f"stratum interval [{lo}, {hi})"
                )


def generate_population(
    spec: PopulationSpec, thresholds: Thresholds, n_labels: int
) -> list[tuple[Query, SyntheticQuerySpec]]:
    """Draw a population; deterministic given the spec's seed."""
    spec.validate_supports(thresholds)
    if n_labels < 2:
        raise ConfigurationError(f"need n_labels >= 2, got {n_labels}")
    n = spec.size
    if n == 0:
        return []
    rng = substream(spec.seed, "population")
    weights = np.array([spec.strata[level].weight for level in _LEVELS])
    weights = weights / weights.sum()
    stratum_idx = rng.choice(len(_LEVELS), size=n, p=weights)
    rhos = np.empty(n)
    for i, level in enumerate(_LEVELS):
        mask = stratum_idx == i
        count = int(mask.sum())
        if count:
            rhos[mask] = spec.strata[level].rho.draw(rng, count)
    labels = rng.integers(0, n_labels, size=n)
    rho_zeros = spec.rho_zero.draw(rng, rhos)
    population = []
    for i in range(n):
        query = Query(query_id=f"q{i:07d}", gold_label=int(labels[i]))
        qspec = SyntheticQuerySpec(
            rho=float(rhos[i]),
            concentration=spec.concentration,
            rho_zero=float(rho_zeros[i]),
        )
        population.append((query, qspec))
    return population


def oracle_levels(
    population: Sequence[tuple[Query, SyntheticQuerySpec]], thresholds: Thresholds
) -> dict[str, DifficultyLevel]:
    """Reference stratum of each query, from its true success rate."""
    return {
        query.query_id: assign_level(qspec.rho, thresholds) for query, qspec in population
    }


def random_success_by_query(
    population: Sequence[tuple[Query, SyntheticQuerySpec]],
    pool: DemoPool,
    oracle: SuccessOracle,
    trials_per_query: int,
    seed: int,
) -> dict[str, float]:
    """Mean realized success over fresh random contexts, per query."""
    if trials_per_query < 1:
        raise ConfigurationError(f"need trials_per_query >= 1, got {trials_per_query}")
    means: dict[str, float] = {}
    for query, _ in population:
        rng = substream(seed, "random-success", query.query_id)
        hits = 0
        for t in range(trials_per_query):
            context = sample_balanced_context(pool, rng, sample_index=t)
            hits += oracle.evaluate(query, context, rng).realized
        means[query.query_id] = hits / trials_per_query
    return means


def stratum_success_table(
    population: Sequence[tuple[Query, SyntheticQuerySpec]],
    pool: DemoPool,
    oracle: SuccessOracle,
    trials_per_query: int,
    seed: int,
    thresholds: Thresholds,
) -> dict[DifficultyLevel, float | None]:
    """Mean random-context success per oracle stratum; None where empty."""
    by_query = random_success_by_query(population, pool, oracle, trials_per_query, seed)
    levels = oracle_levels(population, thresholds)
    sums = {level: 0.0 for level in _LEVELS}
    counts = {level: 0 for level in _LEVELS}
    for query_id, mean in by_query.items():
        level = levels[query_id]
        sums[level] += mean
        counts[level] += 1
    return {
        level: (sums[level] / counts[level] if counts[level] else None) for level in _LEVELS
    }


@dataclass(frozen=True, slots=True)
class StratumCells:
    """One report row: every per-stratum statistic, None where undefined."""

    n: int
    composition: float
    random_success: float | None
    accuracy: float | None
    rejection_rate: float | None
    avg_attempts: float | None
    zero_shot_accuracy: float | None = None
    zero_shot_ratio: float | None = None


@dataclass(frozen=True, slots=True)
class TagStats:
    """Joint and per-tag risk statistics over a run."""

    n_queries: int
    n_tagged: int
    n_hard_query: int
    n_no_good_demo: int
    tag_rate: float
    joint_precision: float | None
    hard_query_precision: float | None
    no_good_demo_precision: float | None


@dataclass(frozen=True)
class StratumReport:
    """Full per-stratum report over one inference run."""

    n_queries: int
    by_oracle: Mapping[DifficultyLevel, StratumCells]
    by_routed: Mapping[DifficultyLevel, StratumCells]
    tags: TagStats


@dataclass(frozen=True, slots=True)
class _Row:
    query_id: str
    routed_level: DifficultyLevel
    tag: RiskTag
    attempts: int
    accepted: bool
    success: bool


def _normalize(outcome: InferenceOutcome | Mapping) -> _Row:
    if isinstance(outcome, InferenceOutcome):
        return _Row(
            query_id=outcome.query_id,
            routed_level=outcome.routed_level,
            tag=outcome.tag,
            attempts=outcome.attempts,
            accepted=outcome.accepted_index is not None,
            success=bool(outcome.final_success),
        )
    return _Row(
        query_id=outcome["query_id"],
        routed_level=DifficultyLevel[outcome["routed_level"]],
        tag=RiskTag(outcome["tag"]),
        attempts=int(outcome["attempts"]),
        accepted=outcome.get("accepted_index") is not None,
        success=bool(outcome["success"]),
    )


def pipeline_report(
    outcomes: Sequence[InferenceOutcome | Mapping],
    population: Sequence[tuple[Query, SyntheticQuerySpec]],
    oracle: SuccessOracle,
    rng: np.random.Generator,
    thresholds: Thresholds,
    random_success: Mapping[str, float] | None = None,
) -> StratumReport:
    """Aggregate an outcome log into the per-stratum report.

    Tagged queries still count toward accuracy with their fallback context's
    realized outcome; the tags are diagnostics, not abstentions.  ``rng``
    drives zero-shot probes for oracles that need randomness there.
    """
    rows = [_normalize(o) for o in outcomes]
    n = len(rows)
    queries = {query.query_id: query for query, _ in population}
    levels = oracle_levels(population, thresholds)
    missing = [r.query_id for r in rows if r.query_id not in queries]
    if missing:
        raise ConfigurationError(f"outcomes reference unknown queries, e.g. {missing[0]!r}")
    if len({r.query_id for r in rows}) != n:
        raise ConfigurationError("duplicate query_id in outcome log")

    def cells_for(members: list[_Row], grouping_level: DifficultyLevel | None) -> StratumCells:
        count = len(members)
        accepted = [r for r in members if r.accepted]
        judged = [r for r in members if r.routed_level != DifficultyLevel.LX]
        rejected = [r for r in members if r.tag == RiskTag.NO_GOOD_DEMO]
        rs = None
        if random_success is not None and count:
            rs = sum(random_success[r.query_id] for r in members) / count
        zero_acc = None
        zero_ratio = None
        accuracy = (sum(r.success for r in members) / count) if count else None
        if grouping_level == DifficultyLevel.L1 and count:
            zero_hits = sum(
                oracle.evaluate_zero_shot(queries[r.query_id], rng) for r in members
            )
            zero_acc = zero_hits / count
            if accuracy:
                zero_ratio = zero_acc / accuracy
        return StratumCells(
            n=count,
            composition=(count / n) if n else 0.0,
            random_success=rs,
            accuracy=accuracy,
            rejection_rate=(len(rejected) / len(judged)) if judged else None,
            avg_attempts=(sum(r.attempts for r in accepted) / len(accepted))
            if accepted
            else None,
            zero_shot_accuracy=zero_acc,
            zero_shot_ratio=zero_ratio,
        )

    by_oracle = {}
    by_routed = {}
    for level in _LEVELS:
        oracle_members = [r for r in rows if levels[r.query_id] == level]
        routed_members = [r for r in rows if r.routed_level == level]
        by_oracle[level] = cells_for(oracle_members, None)
        by_routed[level] = cells_for(
            routed_members, DifficultyLevel.L1 if level == DifficultyLevel.L1 else None
        )

    tagged = [r for r in rows if r.tag != RiskTag.NONE]
    hard = [r for r in tagged if r.tag == RiskTag.HARD_QUERY]
    ngd = [r for r in tagged if r.tag == RiskTag.NO_GOOD_DEMO]

    def precision(members: list[_Row]) -> float | None:
        if not members:
            return None
        return sum(levels[r.query_id] == DifficultyLevel.LX for r in members) / len(members)

    tags = TagStats(
        n_queries=n,
        n_tagged=len(tagged),
        n_hard_query=len(hard),
        n_no_good_demo=len(ngd),
        tag_rate=(len(tagged) / n) if n else 0.0,
        joint_precision=precision(tagged),
        hard_query_precision=precision(hard),
        no_good_demo_precision=precision(ngd),
    )

    report = StratumReport(n_queries=n, by_oracle=by_oracle, by_routed=by_routed, tags=tags)
    _check_identities(report, rows)
    return report


def _check_identities(report: StratumReport, rows: list[_Row]) -> None:
    n = report.n_queries
    if n == 0:
        return
    for grouping in (report.by_oracle, report.by_routed):
        total = sum(cells.composition for cells in grouping.values())
        if abs(total - 1.0) > 1e-9:
            raise AssertionError(f"composition fractions sum to {total}, expected 1")
    n_accepted = sum(r.accepted for r in rows)
    n_rejected = sum(r.tag == RiskTag.NO_GOOD_DEMO for r in rows)
    n_lx = sum(r.routed_level == DifficultyLevel.LX for r in rows)
    if n_accepted + n_rejected + n_lx != n:
        raise AssertionError(
            f"accepted ({n_accepted}) + rejected ({n_rejected}) + tail-routed ({n_lx}) != {n}"
        )


def report_records(report: StratumReport) -> list[dict]:
    """Machine-readable rows, one per (grouping, stratum), plus a tags row."""
    rows = []
    for grouping, cells_map in (("oracle", report.by_oracle), ("routed", report.by_routed)):
        for level in _LEVELS:
            cells = cells_map[level]
            rows.append(
                {
                    "grouping": grouping,
                    "stratum": level.name,
                    "n": cells.n,
                    "composition": cells.composition,
                    "random_success": cells.random_success,
                    "accuracy": cells.accuracy,
                    "rejection_rate": cells.rejection_rate,
                    "avg_attempts": cells.avg_attempts,
                    "zero_shot_accuracy": cells.zero_shot_accuracy,
                    "zero_shot_ratio": cells.zero_shot_ratio,
                }
            )
    tags = report.tags
    rows.append(
        {
            "grouping": "tags",
            "stratum": "ALL",
            "n": tags.n_queries,
            "n_tagged": tags.n_tagged,
            "n_hard_query": tags.n_hard_query,
            "n_no_good_demo": tags.n_no_good_demo,
            "tag_rate": tags.tag_rate,
            "joint_precision": tags.joint_precision,
            "hard_query_precision": tags.hard_query_precision,
            "no_good_demo_precision": tags.no_good_demo_precision,
        }
    )
    return rows


def _fmt(value: float | int | None, digits: int = 4) -> str:
    if value is None:
        return NA_TOKEN
    if isinstance(value, int):
        return str(value)
    return f"{value:.{digits}f}"


def report_text(report: StratumReport) -> str:
    """Aligned text tables for terminal reading."""
    lines = [f"queries: {report.n_queries}", ""]
    header = (
        f"{'stratum':<8}{'n':>8}{'share':>9}{'rand_succ':>11}{'accuracy':>10}"
        f"{'rej_rate':>10}{'avg_att':>9}{'zshot':>9}{'zratio':>9}"
    )
    for title, cells_map in (
        ("by oracle stratum", report.by_oracle),
        ("by routed stratum", report.by_routed),
    ):
        lines.append(f"== {title} ==")
        lines.append(header)
        for level in _LEVELS:
            c = cells_map[level]
            lines.append(
                f"{level.name:<8}{c.n:>8}{_fmt(c.composition):>9}"
                f"{_fmt(c.random_success):>11}{_fmt(c.accuracy):>10}"
                f"{_fmt(c.rejection_rate):>10}{_fmt(c.avg_attempts, 2):>9}"
                f"{_fmt(c.zero_shot_accuracy):>9}{_fmt(c.zero_shot_ratio):>9}"
            )
        lines.append("")
    t = report.tags
    lines.append("== risk tags ==")
    lines.append(
        f"tagged {t.n_tagged}/{t.n_queries} (rate {_fmt(t.tag_rate)}); "
        f"hard_query {t.n_hard_query}, no_good_demo {t.n_no_good_demo}"
    )
    lines.append(
        f"precision: joint {_fmt(t.joint_precision)}, "
        f"hard_query {_fmt(t.hard_query_precision)}, "
        f"no_good_demo {_fmt(t.no_good_demo_precision)}"
    )
    lines.append("")
    return "\n".join(lines)
