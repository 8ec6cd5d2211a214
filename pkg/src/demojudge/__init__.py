"""Difficulty-stratified, budgeted sample-and-judge demonstration selection.

Library layout:

- :mod:`demojudge.core`        domain types and the class-balanced proposal sampler
- :mod:`demojudge.oracle`      success oracles (synthetic model + adapter wire codec)
- :mod:`demojudge.stratify`    difficulty estimation, supervision sets, concentration bounds
- :mod:`demojudge.budgeting`   coverage/budget/attempt closed forms
- :mod:`demojudge.predictors`  router and judge contracts with synthetic references
- :mod:`demojudge.inference`   the routed stop-on-acceptance workflow
- :mod:`demojudge.evaluation`  synthetic populations, per-stratum metrics, reports
- :mod:`demojudge.verify`      empirical verification of every guarantee
- :mod:`demojudge.cli`         the ``demojudge`` command
"""

from .budgeting import (
    BudgetPlan,
    budget_for_miss,
    coverage_probability,
    expected_attempts,
    stratum_budget_plan,
)
from .core import (
    AcceptanceThresholds,
    ConfigurationError,
    DemoContext,
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
from .config import RunConfig, default_config, load_config
from .evaluation import (
    PopulationSpec,
    RhoDistribution,
    RhoZeroModel,
    StratumReport,
    StratumSpec,
    generate_population,
    pipeline_report,
    stratum_success_table,
)
from .inference import InferenceOutcome, run_batch, run_query
from .oracle import PairOutcome, SuccessOracle, SyntheticOracle, SyntheticQuerySpec
from .predictors import (
    JudgeBank,
    OrdinalRouter,
    decode_ordinal,
    oracle_judges,
    oracle_router,
    router_micro_accuracy,
    tune_acceptance_thresholds,
)
from .stratify import (
    QueryDifficultyProfile,
    SupervisionBundle,
    TrialRecord,
    assign_level,
    build_supervision,
    estimate_success_rate,
    hoeffding_bound,
    mislabel_bound,
    trials_needed,
)

__version__ = "0.1.0"
