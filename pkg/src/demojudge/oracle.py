"""Success oracles: the frozen target model abstracted as s(query, context).

An oracle answers one question per call: did the target model get the query
right under this demonstration context?  The synthetic implementation makes
that question statistically well-defined without any model: each query has a
true random-context success rate ``rho``, and each (query, context) pair owns
a latent per-pair success probability drawn from ``Beta(kappa * rho,
kappa * (1 - rho))`` — mean ``rho``, dispersion controlled by the
concentration ``kappa``.  The latent value is a pure function of the pair
content (inverse-CDF transform of a content-keyed uniform), so the same pair
always has the same latent probability; only the realized 0/1 outcome consumes
randomness from the caller's stream.  That fixed latent function is the ground
truth that synthetic judges approximate.

The wire contract for adapters that talk to a real model service is defined at
the bottom; only the request/response codec lives here, not any client.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence, runtime_checkable

import numpy as np
from scipy.special import betaincinv

from .core import ConfigurationError, DemoContext, Query
from .rng import key_uniform

__all__ = [
    "SuccessIndicator",
    "SyntheticQuerySpec",
    "PairOutcome",
    "SuccessOracle",
    "SyntheticOracle",
    "adapter_request",
    "score_adapter_response",
]

# A success indicator is just a boolean: did the target answer correctly.
SuccessIndicator = bool

_PAIR_TAG = "pair-latent"
_ZERO_SHOT_TAG = "zero-shot"


@dataclass(frozen=True, slots=True)
class SyntheticQuerySpec:
    """Latent difficulty parameters of one synthetic query.

    rho            true success rate under random class-balanced contexts
    concentration  Beta dispersion of per-pair probabilities around rho
    rho_zero       zero-shot success rate (used only by evaluation reports)
    """

    rho: float
    concentration: float = 4.0
    rho_zero: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.rho <= 1.0):
            raise ConfigurationError(f"rho must be in [0, 1], got {self.rho}")
        if self.concentration <= 0.0:
            raise ConfigurationError(f"concentration must be > 0, got {self.concentration}")
        if not (0.0 <= self.rho_zero <= 1.0):
            raise ConfigurationError(f"rho_zero must be in [0, 1], got {self.rho_zero}")


@dataclass(frozen=True, slots=True)
class PairOutcome:
    """One oracle evaluation: latent per-pair probability (if known) and the realized outcome."""

    latent_p: float | None
    realized: SuccessIndicator


@runtime_checkable
class SuccessOracle(Protocol):
    """Anything that can score a (query, context) pair to a 0/1 success outcome."""

    def evaluate(
        self, query: Query, context: DemoContext, rng: np.random.Generator
    ) -> PairOutcome: ...

    def evaluate_zero_shot(self, query: Query, rng: np.random.Generator) -> SuccessIndicator: ...


class SyntheticOracle:
    """Closed-world oracle over a population of :class:`SyntheticQuerySpec`.

    Evaluation counters are split between context evaluations and zero-shot
    evaluations so pipeline invariants ("one target call per query") can be
    asserted without report-time zero-shot probes muddying the count.  Both
    counters are thread-safe; the oracle itself is safe to share across
    workers because the latent function is pure.
    """

    def __init__(self, specs: Mapping[str, SyntheticQuerySpec]):
        self._specs = dict(specs)
        self._lock = threading.Lock()
        self._n_evaluations = 0
        self._n_zero_shot = 0

    @property
    def n_evaluations(self) -> int:
        return self._n_evaluations

    @property
    def n_zero_shot(self) -> int:
        return self._n_zero_shot

    def reset_counters(self) -> None:
        with self._lock:
            self._n_evaluations = 0
            self._n_zero_shot = 0

    def spec_for(self, query: Query) -> SyntheticQuerySpec:
        try:
            return self._specs[query.query_id]
        except KeyError:
            raise ConfigurationError(f"unknown query_id {query.query_id!r}") from None

    def latent_success_probability(self, query: Query, context: DemoContext) -> float:
        """Fixed per-pair success probability; identical for identical pairs.

        Degenerate rho in {0, 1} bypasses the Beta transform and returns rho
        exactly, so impossible/trivial queries stay exactly impossible/trivial.
        """
        spec = self.spec_for(query)
        if spec.rho in (0.0, 1.0):
            return spec.rho
        u = key_uniform(_PAIR_TAG, query.query_id, *context.demo_ids())
        a = spec.concentration * spec.rho
        b = spec.concentration * (1.0 - spec.rho)
        return float(betaincinv(a, b, u))

    def evaluate(
        self, query: Query, context: DemoContext, rng: np.random.Generator
    ) -> PairOutcome:
        latent = self.latent_success_probability(query, context)
        realized = bool(rng.random() < latent)
        with self._lock:
            self._n_evaluations += 1
        return PairOutcome(latent_p=latent, realized=realized)

    def evaluate_zero_shot(self, query: Query, rng: np.random.Generator) -> SuccessIndicator:
        """Zero-shot outcome, a fixed fact of the query (frozen model, no sampling).

        The outcome is keyed by query_id alone: re-asking the same query
        always returns the same answer, mirroring deterministic greedy
        decoding with no demonstrations.  ``rng`` is accepted for interface
        compatibility with oracles that need randomness.
        """
        del rng
        spec = self.spec_for(query)
        with self._lock:
            self._n_zero_shot += 1
        return key_uniform(_ZERO_SHOT_TAG, query.query_id) < spec.rho_zero


def adapter_request(
    query: Query, context: DemoContext, label_options: Sequence[str]
) -> dict:
    """Build the wire request for a real-model adapter.

    The adapter is expected to run the target model on the rendered prompt and
    answer with ``{"predicted_label": <one of label_options>}``.
    """
    _check_options(label_options)
    return {
        "query_id": query.query_id,
        "query_text": query.payload,
        "demos": [
            {"input": demo.input, "label_string": label_options[demo.label]}
            for demo in context.demos
        ],
        "label_options": list(label_options),
    }


def score_adapter_response(
    response: Mapping, query: Query, label_options: Sequence[str]
) -> SuccessIndicator:
    """Score an adapter response: exact match against the gold verbalizer."""
    _check_options(label_options)
    try:
        predicted = response["predicted_label"]
    except KeyError:
        raise ValueError("adapter response missing 'predicted_label'") from None
    if predicted not in label_options:
        raise ValueError(
            f"predicted_label {predicted!r} is not one of the label options"
        )
    if query.gold_label >= len(label_options):
        raise ConfigurationError(
            f"gold label {query.gold_label} out of range for {len(label_options)} options"
        )
    return predicted == label_options[query.gold_label]


def _check_options(label_options: Sequence[str]) -> None:
    if len(label_options) < 2:
        raise ConfigurationError("need at least two label options")
    if len(set(label_options)) != len(label_options):
        raise ConfigurationError("label options must be distinct")
