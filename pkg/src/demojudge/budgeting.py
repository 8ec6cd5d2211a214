"""Closed-form coverage and cost toolkit for budgeted candidate sampling.

With per-candidate success probability ``rho``, K independent draws contain at
least one success with probability ``1 - (1 - rho)**K``; inverting that gives
the minimum budget for a target miss probability.  Stratum budgets use each
stratum's success-rate lower bound as a conservative ``rho``.  The expected
number of judge evaluations under stop-on-acceptance is the truncated
geometric mean ``(1 - (1 - a)**K) / a`` for acceptance rate ``a``.

All functions are pure; natural logarithms throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import ConfigurationError, StratumBudgets, Thresholds

__all__ = [
    "BudgetPlan",
    "coverage_probability",
    "budget_for_miss",
    "stratum_budget_plan",
    "expected_attempts",
    "expected_attempts_given_accepted",
]

# Absorbs float noise when log(delta)/log(1-rho) lands on an exact integer.
_CEIL_GUARD = 1e-12


@dataclass(frozen=True, slots=True)
class BudgetPlan:
    """Minimum budgets for a miss target plus worst-case miss at configured budgets."""

    delta: float
    k_l2: int
    k_l3: int
    miss_l2: float
    miss_l3: float


def coverage_probability(rho: float, k: int) -> float:
    """P(at least one success among k independent candidates at rate rho)."""
    if not (0.0 <= rho <= 1.0):
        raise ConfigurationError(f"rho must be in [0, 1], got {rho}")
    if k < 1:
        raise ConfigurationError(f"k must be >= 1, got {k}")
    return 1.0 - (1.0 - rho) ** k


def budget_for_miss(rho: float, delta: float) -> int:
    """Minimal K with (1 - rho)**K <= delta.

    Degenerate rho in {0, 1} is rejected rather than mapped to infinity or 1:
    such values indicate a configuration mistake the caller should handle
    explicitly.
    """
    if not (0.0 < rho < 1.0):
        raise ConfigurationError(f"rho must be strictly inside (0, 1), got {rho}")
    if not (0.0 < delta < 1.0):
        raise ConfigurationError(f"delta must be in (0, 1), got {delta}")
    ratio = math.log(delta) / math.log(1.0 - rho)
    return max(1, math.ceil(ratio - _CEIL_GUARD))


def stratum_budget_plan(
    thresholds: Thresholds, budgets: StratumBudgets, delta: float
) -> BudgetPlan:
    """Plan budgets for the two brittle strata from their success-rate lower bounds.

    The middle stratum is bounded below by ``beta`` and the hard stratum by
    ``gamma``; the plan reports both the minimum budgets achieving miss
    probability ``delta`` under those worst cases and the worst-case miss at
    the budgets actually configured.
    """
    return BudgetPlan(
        delta=delta,
        k_l2=budget_for_miss(thresholds.beta, delta),
        k_l3=budget_for_miss(thresholds.gamma, delta),
        miss_l2=(1.0 - thresholds.beta) ** budgets.k_l2,
        miss_l3=(1.0 - thresholds.gamma) ** budgets.k_l3,
    )


def expected_attempts(acceptance_rate: float, k: int) -> float:
    """Expected judge evaluations under stop-on-acceptance truncated at k.

    Equals ``sum_{i=1..k} (1 - a)**(i - 1)``; a zero acceptance rate consumes
    the whole budget every time, so returns k.
    """
    if not (0.0 <= acceptance_rate <= 1.0):
        raise ConfigurationError(f"acceptance rate must be in [0, 1], got {acceptance_rate}")
    if k < 1:
        raise ConfigurationError(f"k must be >= 1, got {k}")
    if acceptance_rate == 0.0:
        return float(k)
    return (1.0 - (1.0 - acceptance_rate) ** k) / acceptance_rate


def expected_attempts_given_accepted(acceptance_rate: float, k: int) -> float:
    """Expected judge evaluations conditional on accepting within the budget.

    Removes the k-evaluation mass of budget-exhausted runs from the truncated
    mean: (E[evals] - k * (1-a)**k) / (1 - (1-a)**k).
    """
    if not (0.0 < acceptance_rate <= 1.0):
        raise ConfigurationError(
            f"acceptance rate must be in (0, 1] to condition on acceptance, got {acceptance_rate}"
        )
    if k < 1:
        raise ConfigurationError(f"k must be >= 1, got {k}")
    miss = (1.0 - acceptance_rate) ** k
    return (expected_attempts(acceptance_rate, k) - k * miss) / (1.0 - miss)
