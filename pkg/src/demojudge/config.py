"""Declarative run configuration.

One YAML file describes a whole run: thresholds, budgets, acceptance
thresholds (or "tune"), trial counts, the synthetic population, predictor
selection with their error knobs, per-call costs, seed, output directory,
parallelism and trace retention.  Parsing is strict — unknown fields are
rejected at every level — and every domain invariant is validated at load
time.  CLI flags override individual fields; the effective config is echoed
into the output directory for provenance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .core import (
    AcceptanceThresholds,
    ConfigurationError,
    DifficultyLevel,
    StratumBudgets,
    Thresholds,
)
from .evaluation import PopulationSpec, RhoDistribution, RhoZeroModel, StratumSpec

__all__ = ["RunConfig", "default_config", "load_config", "parse_config", "apply_overrides", "config_to_mapping"]

CONFIG_SCHEMA = "runconfig/1"

_TRACE_MODES = ("full", "summary", "none")
_ROUTER_KINDS = ("oracle", "noisy")
_JUDGE_KINDS = ("oracle", "bounded", "biased")


def _check_keys(section: Mapping, allowed: tuple[str, ...], where: str) -> None:
    if not isinstance(section, Mapping):
        raise ConfigurationError(f"{where} must be a mapping")
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigurationError(f"unknown field(s) {unknown} in {where}")


@dataclass(frozen=True, slots=True)
class TaskConfig:
    n_labels: int = 3
    demos_per_class: int = 40

    def __post_init__(self) -> None:
        if self.n_labels < 2 or self.demos_per_class < 1:
            raise ConfigurationError("task needs n_labels >= 2 and demos_per_class >= 1")


@dataclass(frozen=True, slots=True)
class RouterConfig:
    kind: str = "oracle"
    flip_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in _ROUTER_KINDS:
            raise ConfigurationError(f"router kind must be one of {_ROUTER_KINDS}, got {self.kind!r}")
        if not (0.0 <= self.flip_rate <= 1.0):
            raise ConfigurationError(f"flip_rate must be in [0, 1], got {self.flip_rate}")
        if self.kind == "oracle" and self.flip_rate != 0.0:
            raise ConfigurationError("oracle router cannot have a nonzero flip_rate")


@dataclass(frozen=True, slots=True)
class JudgeConfig:
    kind: str = "bounded"
    epsilon: tuple[float, float, float] | None = None  # None picks the kind's default
    bias: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in _JUDGE_KINDS:
            raise ConfigurationError(f"judge kind must be one of {_JUDGE_KINDS}, got {self.kind!r}")
        if self.epsilon is None:
            eps = (0.0, 0.0, 0.0) if self.kind == "oracle" else (0.05, 0.05, 0.05)
            object.__setattr__(self, "epsilon", eps)
        for eps in self.epsilon:
            if not (0.0 <= eps < 1.0):
                raise ConfigurationError(f"judge epsilon must be in [0, 1), got {eps}")
        if self.kind == "oracle" and (any(self.epsilon) or self.bias):
            raise ConfigurationError("oracle judge cannot have noise or bias")
        if self.kind != "biased" and self.bias:
            raise ConfigurationError("bias requires judge kind 'biased'")

    def epsilon_for(self, level: DifficultyLevel) -> float:
        return self.epsilon[level.value - 1]


@dataclass(frozen=True, slots=True)
class CostConfig:
    router_call: float = 1.0
    judge_l1: float = 1.0
    judge_l2: float = 3.0
    judge_l3: float = 9.0
    oracle_call: float = 100.0

    def __post_init__(self) -> None:
        for name in ("router_call", "judge_l1", "judge_l2", "judge_l3", "oracle_call"):
            if getattr(self, name) < 0.0:
                raise ConfigurationError(f"cost {name} must be >= 0")


@dataclass(frozen=True, slots=True)
class TuningConfig:
    grid_step: float = 0.05
    validation_size: int = 400

    def __post_init__(self) -> None:
        if not (0.0 < self.grid_step < 1.0):
            raise ConfigurationError(f"grid_step must be in (0, 1), got {self.grid_step}")
        if self.validation_size < 1:
            raise ConfigurationError("validation_size must be >= 1")


@dataclass(frozen=True, slots=True)
class StratifyConfig:
    n_queries: int | None = None

    def __post_init__(self) -> None:
        if self.n_queries is not None and self.n_queries < 1:
            raise ConfigurationError("stratify.n_queries must be >= 1")


@dataclass(frozen=True, slots=True)
class ReportConfig:
    trials_per_query: int = 200
    figures: bool = True

    def __post_init__(self) -> None:
        if self.trials_per_query < 1:
            raise ConfigurationError("report.trials_per_query must be >= 1")


@dataclass(frozen=True, slots=True)
class VerifyConfig:
    n_queries: int = 20000

    def __post_init__(self) -> None:
        if self.n_queries < 100:
            raise ConfigurationError("verify.n_queries must be >= 100")


@dataclass(frozen=True, slots=True)
class PopulationConfig:
    size: int = 2000
    concentration: float = 4.0
    rho_zero: RhoZeroModel = field(default_factory=RhoZeroModel)
    strata: Mapping[DifficultyLevel, StratumSpec] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ConfigurationError("population.size must be >= 1")
        if self.concentration <= 0.0:
            raise ConfigurationError("population.concentration must be > 0")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 20250810
    output_dir: str = "runs/default"
    parallelism: int = 1
    trace: str = "summary"
    trials_per_query: int = 20
    thresholds: Thresholds = field(default_factory=Thresholds)
    budgets: StratumBudgets = field(default_factory=StratumBudgets)
    acceptance: AcceptanceThresholds | None = None  # None means "tune"
    task: TaskConfig = field(default_factory=TaskConfig)
    population: PopulationConfig = field(default_factory=PopulationConfig)
    router: RouterConfig = field(default_factory=RouterConfig)
    judge: JudgeConfig = field(default_factory=JudgeConfig)
    costs: CostConfig = field(default_factory=CostConfig)
    tuning: TuningConfig = field(default_factory=TuningConfig)
    stratify: StratifyConfig = field(default_factory=StratifyConfig)
    report: ReportConfig = field(default_factory=ReportConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)

    def __post_init__(self) -> None:
        if self.seed < 0:
            raise ConfigurationError("seed must be >= 0")
        if self.parallelism < 1:
            raise ConfigurationError("parallelism must be >= 1")
        if self.trace not in _TRACE_MODES:
            raise ConfigurationError(f"trace must be one of {_TRACE_MODES}, got {self.trace!r}")
        if self.trials_per_query < 1:
            raise ConfigurationError("trials_per_query must be >= 1")
        # Population supports must fit the stratum intervals of these thresholds.
        PopulationSpec(
            strata=self.population.strata,
            size=self.population.size,
            seed=0,
            concentration=self.population.concentration,
            rho_zero=self.population.rho_zero,
        ).validate_supports(self.thresholds)


def _default_strata() -> dict[DifficultyLevel, StratumSpec]:
    """Mixture calibrated to a question-classification difficulty profile."""
    return {
        DifficultyLevel.L1: StratumSpec(0.644, RhoDistribution("uniform", low=0.93, high=0.995)),
        DifficultyLevel.L2: StratumSpec(0.221, RhoDistribution("uniform", low=0.30, high=0.68)),
        DifficultyLevel.L3: StratumSpec(0.060, RhoDistribution("uniform", low=0.10, high=0.30)),
        DifficultyLevel.LX: StratumSpec(0.074, RhoDistribution("uniform", low=0.0, high=0.065)),
    }


def default_config() -> RunConfig:
    return RunConfig(population=PopulationConfig(strata=_default_strata()))


def _parse_rho(section: Mapping, where: str) -> RhoDistribution:
    _check_keys(section, ("kind", "value", "low", "high", "values", "weights"), where)
    kind = section.get("kind")
    kwargs: dict[str, Any] = {}
    for key in ("value", "low", "high"):
        if key in section:
            kwargs[key] = float(section[key])
    if "values" in section:
        kwargs["values"] = tuple(float(v) for v in section["values"])
    if "weights" in section:
        kwargs["weights"] = tuple(float(w) for w in section["weights"])
    return RhoDistribution(kind=kind, **kwargs)


def _parse_rho_zero(section: Mapping, where: str) -> RhoZeroModel:
    _check_keys(section, ("kind", "value", "factor", "low", "high"), where)
    kwargs = {key: float(value) for key, value in section.items() if key != "kind"}
    return RhoZeroModel(kind=section.get("kind", "scaled"), **kwargs)


def _parse_population(section: Mapping) -> PopulationConfig:
    _check_keys(section, ("size", "concentration", "rho_zero", "strata"), "population")
    strata_raw = section.get("strata")
    if not isinstance(strata_raw, Mapping):
        raise ConfigurationError("population.strata must be a mapping of L1/L2/L3/LX")
    strata: dict[DifficultyLevel, StratumSpec] = {}
    for name, stratum in strata_raw.items():
        try:
            level = DifficultyLevel[name]
        except KeyError:
            raise ConfigurationError(f"unknown stratum {name!r} in population.strata") from None
        _check_keys(stratum, ("weight", "rho"), f"population.strata.{name}")
        strata[level] = StratumSpec(
            weight=float(stratum["weight"]),
            rho=_parse_rho(stratum["rho"], f"population.strata.{name}.rho"),
        )
    rho_zero = (
        _parse_rho_zero(section["rho_zero"], "population.rho_zero")
        if "rho_zero" in section
        else RhoZeroModel()
    )
    return PopulationConfig(
        size=int(section.get("size", 2000)),
        concentration=float(section.get("concentration", 4.0)),
        rho_zero=rho_zero,
        strata=strata,
    )


def _parse_epsilon(raw: Any) -> tuple[float, float, float]:
    if isinstance(raw, Mapping):
        _check_keys(raw, ("l1", "l2", "l3"), "judge.epsilon")
        return (float(raw.get("l1", 0.0)), float(raw.get("l2", 0.0)), float(raw.get("l3", 0.0)))
    eps = float(raw)
    return (eps, eps, eps)


def _parse_acceptance(raw: Any) -> AcceptanceThresholds | None:
    if raw is None or raw == "tune":
        return None
    if isinstance(raw, Mapping):
        _check_keys(raw, ("tau_l1", "tau_l2", "tau_l3"), "acceptance")
        return AcceptanceThresholds(
            tau_l1=float(raw["tau_l1"]),
            tau_l2=float(raw["tau_l2"]),
            tau_l3=float(raw["tau_l3"]),
        )
    raise ConfigurationError("acceptance must be 'tune' or a tau_l1/tau_l2/tau_l3 mapping")


_TOP_LEVEL_KEYS = (
    "schema",
    "seed",
    "output_dir",
    "parallelism",
    "trace",
    "trials_per_query",
    "thresholds",
    "budgets",
    "acceptance",
    "task",
    "population",
    "router",
    "judge",
    "costs",
    "tuning",
    "stratify",
    "report",
    "verify",
)


def _sub(section: Mapping, name: str, cls, casts: Mapping[str, Any]) -> Any:
    if not isinstance(section, Mapping):
        raise ConfigurationError(f"{name} must be a mapping")
    _check_keys(section, tuple(casts), name)
    kwargs = {}
    for key, cast in casts.items():
        if key in section:
            value = section[key]
            kwargs[key] = value if value is None else cast(value)
    return cls(**kwargs)


def parse_config(mapping: Mapping) -> RunConfig:
    """Build a validated RunConfig from a raw mapping; unknown fields rejected."""
    if not isinstance(mapping, Mapping):
        raise ConfigurationError("config root must be a mapping")
    _check_keys(mapping, _TOP_LEVEL_KEYS, "config")
    schema = mapping.get("schema", CONFIG_SCHEMA)
    if schema != CONFIG_SCHEMA:
        raise ConfigurationError(f"unsupported config schema {schema!r}, expected {CONFIG_SCHEMA!r}")
    defaults = default_config()
    kwargs: dict[str, Any] = {}
    for key, cast in (("seed", int), ("output_dir", str), ("parallelism", int),
                      ("trace", str), ("trials_per_query", int)):
        if key in mapping:
            kwargs[key] = cast(mapping[key])
    if "thresholds" in mapping:
        kwargs["thresholds"] = _sub(
            mapping["thresholds"], "thresholds", Thresholds,
            {"alpha": float, "beta": float, "gamma": float},
        )
    if "budgets" in mapping:
        kwargs["budgets"] = _sub(
            mapping["budgets"], "budgets", StratumBudgets,
            {"k_l1": int, "k_l2": int, "k_l3": int},
        )
    kwargs["acceptance"] = _parse_acceptance(mapping.get("acceptance", "tune"))
    if "task" in mapping:
        kwargs["task"] = _sub(
            mapping["task"], "task", TaskConfig, {"n_labels": int, "demos_per_class": int}
        )
    kwargs["population"] = (
        _parse_population(mapping["population"])
        if "population" in mapping
        else defaults.population
    )
    if "router" in mapping:
        kwargs["router"] = _sub(
            mapping["router"], "router", RouterConfig, {"kind": str, "flip_rate": float}
        )
    if "judge" in mapping:
        section = dict(mapping["judge"])
        _check_keys(section, ("kind", "epsilon", "bias"), "judge")
        judge_kwargs: dict[str, Any] = {"kind": section.get("kind", "bounded")}
        if "epsilon" in section:
            judge_kwargs["epsilon"] = _parse_epsilon(section["epsilon"])
        if "bias" in section:
            judge_kwargs["bias"] = float(section["bias"])
        kwargs["judge"] = JudgeConfig(**judge_kwargs)
    if "costs" in mapping:
        kwargs["costs"] = _sub(
            mapping["costs"], "costs", CostConfig,
            {"router_call": float, "judge_l1": float, "judge_l2": float,
             "judge_l3": float, "oracle_call": float},
        )
    if "tuning" in mapping:
        kwargs["tuning"] = _sub(
            mapping["tuning"], "tuning", TuningConfig,
            {"grid_step": float, "validation_size": int},
        )
    if "stratify" in mapping:
        kwargs["stratify"] = _sub(
            mapping["stratify"], "stratify", StratifyConfig, {"n_queries": int}
        )
    if "report" in mapping:
        kwargs["report"] = _sub(
            mapping["report"], "report", ReportConfig,
            {"trials_per_query": int, "figures": bool},
        )
    if "verify" in mapping:
        kwargs["verify"] = _sub(mapping["verify"], "verify", VerifyConfig, {"n_queries": int})
    return RunConfig(**kwargs)


def load_config(path: str | Path) -> RunConfig:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        mapping = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config {path} is not valid YAML: {exc}") from exc
    if mapping is None:
        mapping = {}
    return parse_config(mapping)


def apply_overrides(mapping: Mapping, overrides: list[str]) -> dict:
    """Apply ``dotted.path=value`` overrides onto a raw config mapping."""
    result: dict = yaml.safe_load(yaml.safe_dump(dict(mapping))) or {}
    for override in overrides:
        if "=" not in override:
            raise ConfigurationError(f"override {override!r} must look like path=value")
        path, raw_value = override.split("=", 1)
        keys = path.strip().split(".")
        if not all(keys):
            raise ConfigurationError(f"override {override!r} has an empty path segment")
        value = yaml.safe_load(raw_value)
        node = result
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigurationError(f"override {override!r} crosses a non-mapping field")
        node[keys[-1]] = value
    return result


def _rho_mapping(rho: RhoDistribution) -> dict:
    out: dict[str, Any] = {"kind": rho.kind}
    if rho.kind == "point":
        out["value"] = rho.value
    elif rho.kind == "uniform":
        out["low"] = rho.low
        out["high"] = rho.high
    else:
        out["values"] = list(rho.values)
        out["weights"] = list(rho.weights)
    return out


def _rho_zero_mapping(model: RhoZeroModel) -> dict:
    out: dict[str, Any] = {"kind": model.kind}
    if model.kind == "constant":
        out["value"] = model.value
    elif model.kind == "scaled":
        out["factor"] = model.factor
    else:
        out["low"] = model.low
        out["high"] = model.high
    return out


def config_to_mapping(cfg: RunConfig) -> dict:
    """Round-trippable plain mapping of the effective configuration."""
    acceptance: Any = "tune"
    if cfg.acceptance is not None:
        acceptance = {
            "tau_l1": cfg.acceptance.tau_l1,
            "tau_l2": cfg.acceptance.tau_l2,
            "tau_l3": cfg.acceptance.tau_l3,
        }
    return {
        "schema": CONFIG_SCHEMA,
        "seed": cfg.seed,
        "output_dir": cfg.output_dir,
        "parallelism": cfg.parallelism,
        "trace": cfg.trace,
        "trials_per_query": cfg.trials_per_query,
        "thresholds": {
            "alpha": cfg.thresholds.alpha,
            "beta": cfg.thresholds.beta,
            "gamma": cfg.thresholds.gamma,
        },
        "budgets": {
            "k_l1": cfg.budgets.k_l1,
            "k_l2": cfg.budgets.k_l2,
            "k_l3": cfg.budgets.k_l3,
        },
        "acceptance": acceptance,
        "task": {"n_labels": cfg.task.n_labels, "demos_per_class": cfg.task.demos_per_class},
        "population": {
            "size": cfg.population.size,
            "concentration": cfg.population.concentration,
            "rho_zero": _rho_zero_mapping(cfg.population.rho_zero),
            "strata": {
                level.name: {
                    "weight": spec.weight,
                    "rho": _rho_mapping(spec.rho),
                }
                for level, spec in cfg.population.strata.items()
            },
        },
        "router": {"kind": cfg.router.kind, "flip_rate": cfg.router.flip_rate},
        "judge": {
            "kind": cfg.judge.kind,
            "epsilon": {
                "l1": cfg.judge.epsilon[0],
                "l2": cfg.judge.epsilon[1],
                "l3": cfg.judge.epsilon[2],
            },
            "bias": cfg.judge.bias,
        },
        "costs": {
            "router_call": cfg.costs.router_call,
            "judge_l1": cfg.costs.judge_l1,
            "judge_l2": cfg.costs.judge_l2,
            "judge_l3": cfg.costs.judge_l3,
            "oracle_call": cfg.costs.oracle_call,
        },
        "tuning": {
            "grid_step": cfg.tuning.grid_step,
            "validation_size": cfg.tuning.validation_size,
        },
        "stratify": {"n_queries": cfg.stratify.n_queries},
        "report": {
            "trials_per_query": cfg.report.trials_per_query,
            "figures": cfg.report.figures,
        },
        "verify": {"n_queries": cfg.verify.n_queries},
    }


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(config_to_mapping(cfg), sort_keys=False)
