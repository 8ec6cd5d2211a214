"""Domain vocabulary: queries, demonstrations, contexts, levels, tags, knobs.

Labels are small non-negative integers indexing the task label set
``{0, ..., n_labels - 1}``.  A demonstration context always holds exactly one
demonstration per label (class-balanced), in randomized order, so the context
length equals the number of labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Mapping

import numpy as np

__all__ = [
    "ConfigurationError",
    "Label",
    "Query",
    "Demonstration",
    "DemoPool",
    "DemoContext",
    "DifficultyLevel",
    "JUDGED_LEVELS",
    "Thresholds",
    "StratumBudgets",
    "AcceptanceThresholds",
    "RiskTag",
    "make_synthetic_pool",
    "sample_balanced_context",
]


class ConfigurationError(ValueError):
    """A domain invariant or configuration constraint is violated."""


Label = int


class DifficultyLevel(IntEnum):
    """Query difficulty strata, totally ordered easiest to hardest."""

    L1 = 1
    L2 = 2
    L3 = 3
    LX = 4


JUDGED_LEVELS = (DifficultyLevel.L1, DifficultyLevel.L2, DifficultyLevel.L3)


class RiskTag(Enum):
    NONE = "NONE"
    HARD_QUERY = "HARD_QUERY"
    NO_GOOD_DEMO = "NO_GOOD_DEMO"


@dataclass(frozen=True, slots=True)
class Query:
    """A task instance with its gold label; payload is opaque text (empty in synthetic mode)."""

    query_id: str
    gold_label: Label
    payload: str = ""

    def __post_init__(self) -> None:
        if self.gold_label < 0:
            raise ConfigurationError(f"gold_label must be non-negative, got {self.gold_label}")


@dataclass(frozen=True, slots=True)
class Demonstration:
    """A labeled example available for in-context prompting."""

    demo_id: str
    label: Label
    input: str = ""

    def __post_init__(self) -> None:
        if self.label < 0:
            raise ConfigurationError(f"label must be non-negative, got {self.label}")


@dataclass(frozen=True)
class DemoPool:
    """Labeled demonstration pool, bucketed by class.

    Every label in the task label set must have at least one demonstration so
    that class-balanced sampling is always feasible, and there must be at
    least two classes.
    """

    demos_by_label: Mapping[Label, tuple[Demonstration, ...]]
    _buckets: tuple[tuple[Demonstration, ...], ...] = field(init=False, repr=False)
    _sizes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        labels = sorted(self.demos_by_label)
        n = len(labels)
        if n < 2:
            raise ConfigurationError(f"pool needs at least 2 classes, got {n}")
        if labels != list(range(n)):
            raise ConfigurationError(f"pool labels must be exactly 0..{n - 1}, got {labels}")
        for label in labels:
            bucket = tuple(self.demos_by_label[label])
            if not bucket:
                raise ConfigurationError(f"pool has no demonstrations for label {label}")
            for demo in bucket:
                if demo.label != label:
                    raise ConfigurationError(
                        f"demo {demo.demo_id!r} has label {demo.label}, found in bucket {label}"
                    )
        object.__setattr__(
            self, "_buckets", tuple(tuple(self.demos_by_label[label]) for label in labels)
        )
        object.__setattr__(
            self, "_sizes", np.array([len(b) for b in self._buckets], dtype=np.int64)
        )

    @property
    def n_labels(self) -> int:
        return len(self._buckets)

    @property
    def context_size(self) -> int:
        """Contexts carry one demonstration per class."""
        return len(self._buckets)

    def bucket(self, label: Label) -> tuple[Demonstration, ...]:
        return self._buckets[label]

    def n_contexts(self) -> int:
        """Size of the enumerable context space (choices times orderings)."""
        return int(np.prod(self._sizes)) * math.factorial(self.n_labels)


@dataclass(frozen=True, slots=True)
class DemoContext:
    """An ordered k-shot demonstration sequence, one demo per class.

    ``sample_index`` records which proposal draw produced the context within
    its local sampling sequence (0-based); standalone single draws use 0.
    """

    demos: tuple[Demonstration, ...]
    sample_index: int = 0

    def __post_init__(self) -> None:
        k = len(self.demos)
        if k < 2:
            raise ConfigurationError(f"context must cover >= 2 classes, got {k}")
        if sorted(d.label for d in self.demos) != list(range(k)):
            raise ConfigurationError(
                "context labels must be a permutation of the label set, got "
                f"{[d.label for d in self.demos]}"
            )

    def demo_ids(self) -> tuple[str, ...]:
        return tuple(d.demo_id for d in self.demos)


@dataclass(frozen=True, slots=True)
class Thresholds:
    """Difficulty thresholds splitting the success-rate axis into four strata."""

    alpha: float = 0.75
    beta: float = 0.3
    gamma: float = 0.1

    def __post_init__(self) -> None:
        if not (0.0 < self.gamma < self.beta < self.alpha < 1.0):
            raise ConfigurationError(
                f"need 1 > alpha > beta > gamma > 0, got "
                f"({self.alpha}, {self.beta}, {self.gamma})"
            )

    def interval(self, level: DifficultyLevel) -> tuple[float, float]:
        """Half-open success-rate interval [lo, hi) of a stratum (L1 closes at 1)."""
        edges = {
            DifficultyLevel.L1: (self.alpha, 1.0),
            DifficultyLevel.L2: (self.beta, self.alpha),
            DifficultyLevel.L3: (self.gamma, self.beta),
            DifficultyLevel.LX: (0.0, self.gamma),
        }
        return edges[level]


@dataclass(frozen=True, slots=True)
class StratumBudgets:
    """Per-stratum candidate sampling budgets; harder strata get more draws."""

    k_l1: int = 10
    k_l2: int = 20
    k_l3: int = 30

    def __post_init__(self) -> None:
        if min(self.k_l1, self.k_l2, self.k_l3) < 1:
            raise ConfigurationError("budgets must be positive")
        if not (self.k_l1 <= self.k_l2 <= self.k_l3):
            raise ConfigurationError(
                f"budgets must be non-decreasing in difficulty, got "
                f"({self.k_l1}, {self.k_l2}, {self.k_l3})"
            )

    def for_level(self, level: DifficultyLevel) -> int:
        if level == DifficultyLevel.L1:
            return self.k_l1
        if level == DifficultyLevel.L2:
            return self.k_l2
        if level == DifficultyLevel.L3:
            return self.k_l3
        raise ConfigurationError("LX has no sampling budget")


@dataclass(frozen=True, slots=True)
class AcceptanceThresholds:
    """Judge-score acceptance thresholds per judged stratum, each in (0, 1)."""

    tau_l1: float = 0.5
    tau_l2: float = 0.5
    tau_l3: float = 0.5

    def __post_init__(self) -> None:
        for name in ("tau_l1", "tau_l2", "tau_l3"):
            value = getattr(self, name)
            if not (0.0 < value < 1.0):
                raise ConfigurationError(f"{name} must be in (0, 1), got {value}")

    def for_level(self, level: DifficultyLevel) -> float:
        if level == DifficultyLevel.L1:
            return self.tau_l1
        if level == DifficultyLevel.L2:
            return self.tau_l2
        if level == DifficultyLevel.L3:
            return self.tau_l3
        raise ConfigurationError("LX has no acceptance threshold")


def make_synthetic_pool(n_labels: int, demos_per_class: int) -> DemoPool:
    """Build a synthetic pool with opaque demonstration texts."""
    if n_labels < 2 or demos_per_class < 1:
        raise ConfigurationError("need n_labels >= 2 and demos_per_class >= 1")
    return DemoPool(
        {
            label: tuple(
                Demonstration(demo_id=f"d{label}_{i}", label=label, input=f"x{label}_{i}")
                for i in range(demos_per_class)
            )
            for label in range(n_labels)
        }
    )


def sample_balanced_context(
    pool: DemoPool, rng: np.random.Generator, sample_index: int = 0
) -> DemoContext:
    """Draw one class-balanced context from the proposal distribution.

    One demonstration is chosen uniformly from each class bucket, then the k
    chosen demos are put in uniformly random order.  Draws are independent
    across calls (sampling with replacement), so repeated calls give i.i.d.
    proposals.
    """
    picks = rng.integers(0, pool._sizes)
    order = rng.permutation(pool.n_labels)
    demos = tuple(pool._buckets[label][picks[label]] for label in order)
    return DemoContext(demos=demos, sample_index=sample_index)
