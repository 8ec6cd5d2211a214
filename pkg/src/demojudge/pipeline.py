"""Stage runners wiring configuration to the library.

Each stage builds its own query population from a stage-specific derived seed
("train" for stratification, "val" for threshold tuning, "test" for inference
and reporting), so repeated runs of any stage with the same config are
byte-identical and stages never share queries.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import io
from .budgeting import BudgetPlan, stratum_budget_plan
from .config import RunConfig, dump_config
from .core import (
    ConfigurationError,
    DemoPool,
    DifficultyLevel,
    Query,
    RiskTag,
    make_synthetic_pool,
)
from .evaluation import (
    PopulationSpec,
    StratumReport,
    generate_population,
    oracle_levels,
    pipeline_report,
    random_success_by_query,
    report_records,
    report_text,
)
from .inference import InferenceOutcome, outcome_record, run_batch
from .oracle import SyntheticOracle, SyntheticQuerySpec
from .predictors import (
    JudgeBank,
    NoiseMode,
    OrdinalRouter,
    SyntheticJudgeConfig,
    select_taus,
    tau_grid_search,
)
from .rng import spawn_seed, substream
from .stratify import (
    QueryDifficultyProfile,
    estimate_success_rate,
    profiles_to_records,
    trials_to_records,
)

__all__ = [
    "build_pool",
    "build_population",
    "build_oracle",
    "build_router",
    "build_judges",
    "derive_seed",
    "run_stratify",
    "run_plan_budgets",
    "run_tune",
    "run_infer",
    "run_report",
    "write_effective_config",
]

Population = list[tuple[Query, SyntheticQuerySpec]]


def derive_seed(seed: int, *labels: str | int) -> int:
    """Stage seed derived from the run seed; stable across runs."""
    return int(spawn_seed(seed, *labels).generate_state(1, "uint64")[0] >> 1)


def build_pool(cfg: RunConfig) -> DemoPool:
    return make_synthetic_pool(cfg.task.n_labels, cfg.task.demos_per_class)


def build_population(cfg: RunConfig, stage: str, size: int | None = None) -> Population:
    spec = PopulationSpec(
        strata=cfg.population.strata,
        size=cfg.population.size if size is None else size,
        seed=derive_seed(cfg.seed, "population", stage),
        concentration=cfg.population.concentration,
        rho_zero=cfg.population.rho_zero,
    )
    return generate_population(spec, cfg.thresholds, cfg.task.n_labels)


def build_oracle(population: Population) -> SyntheticOracle:
    return SyntheticOracle({query.query_id: spec for query, spec in population})


def build_router(cfg: RunConfig, population: Population) -> OrdinalRouter:
    levels = oracle_levels(population, cfg.thresholds)
    flip = cfg.router.flip_rate if cfg.router.kind == "noisy" else 0.0
    return OrdinalRouter(
        levels,
        flip_rate=flip,
        seed=derive_seed(cfg.seed, "router"),
        cost_per_call=cfg.costs.router_call,
    )


def build_judges(cfg: RunConfig, oracle: SyntheticOracle) -> JudgeBank:
    mode = NoiseMode.ZERO if cfg.judge.kind == "oracle" else NoiseMode.UNIFORM_BOUNDED
    configs = {
        level: SyntheticJudgeConfig(
            epsilon=cfg.judge.epsilon_for(level),
            noise_mode=mode,
            bias=cfg.judge.bias,
        )
        for level in (DifficultyLevel.L1, DifficultyLevel.L2, DifficultyLevel.L3)
    }
    costs = {
        DifficultyLevel.L1: cfg.costs.judge_l1,
        DifficultyLevel.L2: cfg.costs.judge_l2,
        DifficultyLevel.L3: cfg.costs.judge_l3,
    }
    return JudgeBank(
        oracle.latent_success_probability,
        configs,
        cost_per_call=costs,
        seed=derive_seed(cfg.seed, "judge"),
    )


def write_effective_config(cfg: RunConfig, outdir: Path) -> Path:
    return io.write_text(outdir / "config.yaml", dump_config(cfg))


def _estimate_profiles(
    cfg: RunConfig,
    population: Population,
    pool: DemoPool,
    oracle: SyntheticOracle,
    stage: str,
) -> list[QueryDifficultyProfile]:
    seed = derive_seed(cfg.seed, "trials", stage)

    def one(query: Query) -> QueryDifficultyProfile:
        rng = substream(seed, "trials", query.query_id)
        return estimate_success_rate(
            query, pool, cfg.trials_per_query, oracle, rng, cfg.thresholds
        )

    queries = [query for query, _ in population]
    if cfg.parallelism == 1 or len(queries) < 2:
        return [one(q) for q in queries]
    with ThreadPoolExecutor(max_workers=cfg.parallelism) as executor:
        return list(executor.map(one, queries))


def run_stratify(cfg: RunConfig, outdir: Path) -> list[QueryDifficultyProfile]:
    """Probe the training population and persist trial log plus profiles."""
    pool = build_pool(cfg)
    size = cfg.stratify.n_queries or cfg.population.size
    population = build_population(cfg, "train", size)
    oracle = build_oracle(population)
    profiles = _estimate_profiles(cfg, population, pool, oracle, "train")
    io.write_jsonl(outdir / "trials.jsonl", trials_to_records(profiles), io.SCHEMAS["trials"])
    io.write_jsonl(outdir / "profiles.jsonl", profiles_to_records(profiles), io.SCHEMAS["profiles"])
    return profiles


def run_plan_budgets(cfg: RunConfig, outdir: Path, delta: float = 0.05) -> BudgetPlan:
    """Emit the budget-plan table for the configured thresholds and budgets."""
    plan = stratum_budget_plan(cfg.thresholds, cfg.budgets, delta)
    row = {
        "delta": plan.delta,
        "k_l2_min": plan.k_l2,
        "k_l3_min": plan.k_l3,
        "k_l2_configured": cfg.budgets.k_l2,
        "k_l3_configured": cfg.budgets.k_l3,
        "miss_l2": plan.miss_l2,
        "miss_l3": plan.miss_l3,
    }
    io.write_jsonl(outdir / "budget_plan.jsonl", [row], io.SCHEMAS["budget_plan"])
    lines = [
        f"target miss probability: {plan.delta}",
        f"{'stratum':<9}{'bound':>8}{'min K':>7}{'set K':>7}{'worst-case miss':>17}",
        f"{'L2':<9}{cfg.thresholds.beta:>8}{plan.k_l2:>7}{cfg.budgets.k_l2:>7}{plan.miss_l2:>17.6e}",
        f"{'L3':<9}{cfg.thresholds.gamma:>8}{plan.k_l3:>7}{cfg.budgets.k_l3:>7}{plan.miss_l3:>17.6e}",
        "",
    ]
    io.write_text(outdir / "budget_plan.txt", "\n".join(lines))
    return plan


def run_tune(cfg: RunConfig, outdir: Path) -> RunConfig:
    """Grid-search acceptance thresholds on a validation population."""
    pool = build_pool(cfg)
    population = build_population(cfg, "val", cfg.tuning.validation_size)
    oracle = build_oracle(population)
    judges = build_judges(cfg, oracle)
    profiles = _estimate_profiles(cfg, population, pool, oracle, "val")
    queries = [query for query, _ in population]
    seed = derive_seed(cfg.seed, "tune")
    points = tau_grid_search(
        queries, profiles, pool, judges, cfg.budgets, oracle,
        grid_step=cfg.tuning.grid_step, seed=seed,
    )
    taus = select_taus(points)
    io.write_jsonl(
        outdir / "tuning.jsonl",
        [
            {
                "level": p.level.name,
                "tau": p.tau,
                "accuracy": p.accuracy,
                "accepted_precision": p.accepted_precision,
                "rejection_rate": p.rejection_rate,
                "n_queries": p.n_queries,
            }
            for p in points
        ],
        io.SCHEMAS["tuning"],
    )
    tuned = replace(cfg, acceptance=taus)
    io.write_text(outdir / "config.tuned.yaml", dump_config(tuned))
    return tuned


def run_infer(cfg: RunConfig, outdir: Path) -> list[InferenceOutcome]:
    """Run the full routed sample-and-judge pipeline over the test population."""
    if cfg.acceptance is None:
        raise ConfigurationError(
            "acceptance thresholds are unset ('tune'); run the tune stage first "
            "or configure tau_l1/tau_l2/tau_l3"
        )
    pool = build_pool(cfg)
    population = build_population(cfg, "test")
    oracle = build_oracle(population)
    router = build_router(cfg, population)
    judges = build_judges(cfg, oracle)
    queries = [query for query, _ in population]
    outcomes = run_batch(
        queries, pool, router, judges, cfg.budgets, cfg.acceptance, oracle,
        seed=derive_seed(cfg.seed, "infer"),
        parallelism=cfg.parallelism,
        trace=cfg.trace,
    )
    if oracle.n_evaluations != len(queries):
        raise AssertionError(
            f"oracle was consulted {oracle.n_evaluations} times for {len(queries)} queries"
        )
    io.write_jsonl(
        outdir / "outcomes.jsonl", (outcome_record(o) for o in outcomes), io.SCHEMAS["outcomes"]
    )
    io.write_json(outdir / "run_summary.json", _cost_summary(cfg, outcomes))
    return outcomes


def _cost_summary(cfg: RunConfig, outcomes: Sequence[InferenceOutcome]) -> dict:
    n = len(outcomes)
    judge_calls = {level: 0 for level in (DifficultyLevel.L1, DifficultyLevel.L2, DifficultyLevel.L3)}
    tags = {tag: 0 for tag in RiskTag}
    for outcome in outcomes:
        tags[outcome.tag] += 1
        if outcome.routed_level != DifficultyLevel.LX:
            judge_calls[outcome.routed_level] += outcome.attempts
    judge_cost = (
        judge_calls[DifficultyLevel.L1] * cfg.costs.judge_l1
        + judge_calls[DifficultyLevel.L2] * cfg.costs.judge_l2
        + judge_calls[DifficultyLevel.L3] * cfg.costs.judge_l3
    )
    total = n * cfg.costs.router_call + judge_cost + n * cfg.costs.oracle_call
    return {
        "n_queries": n,
        "router_calls": n,
        "oracle_calls": n,
        "judge_calls": {level.name: judge_calls[level] for level in judge_calls},
        "tags": {tag.value: tags[tag] for tag in RiskTag},
        "cost": {
            "router": n * cfg.costs.router_call,
            "judges": judge_cost,
            "oracle": n * cfg.costs.oracle_call,
            "total": total,
        },
    }


def run_report(
    cfg: RunConfig,
    outdir: Path,
    outcomes: Sequence[InferenceOutcome] | str | Path | None = None,
) -> StratumReport:
    """Aggregate an outcome log into report tables, records, and figures."""
    if outcomes is None:
        outcomes = outdir / "outcomes.jsonl"
    if isinstance(outcomes, (str, Path)):
        rows: Sequence = list(io.read_jsonl(outcomes, io.SCHEMAS["outcomes"]))
    else:
        rows = outcomes
    pool = build_pool(cfg)
    population = build_population(cfg, "test")
    oracle = build_oracle(population)
    success = random_success_by_query(
        population, pool, oracle, cfg.report.trials_per_query,
        seed=derive_seed(cfg.seed, "report-success"),
    )
    report = pipeline_report(
        rows,
        population,
        oracle,
        rng=substream(derive_seed(cfg.seed, "report"), "zero-shot"),
        thresholds=cfg.thresholds,
        random_success=success,
    )
    io.write_jsonl(outdir / "report.jsonl", report_records(report), io.SCHEMAS["report"])
    io.write_text(outdir / "report.txt", report_text(report))
    if cfg.report.figures:
        from .figures import render_report_figures

        render_report_figures(report, outdir / "figures")
    return report
