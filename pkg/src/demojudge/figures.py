"""Figure rendering for the report path.

Renders the stratum report to PNG files next to the delimited output: stratum
composition under both groupings, random-context success against pipeline
accuracy, and the rejection/attempts cost picture.  Uses the Agg backend so
rendering works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .core import DifficultyLevel
from .evaluation import StratumReport

__all__ = ["render_report_figures"]

_LEVELS = (DifficultyLevel.L1, DifficultyLevel.L2, DifficultyLevel.L3, DifficultyLevel.LX)
_LEVEL_NAMES = [level.name for level in _LEVELS]


def _bar_pair(ax, left: list[float | None], right: list[float | None], labels: tuple[str, str]):
    x = np.arange(len(_LEVELS))
    width = 0.38
    left_vals = [np.nan if v is None else v for v in left]
    right_vals = [np.nan if v is None else v for v in right]
    ax.bar(x - width / 2, left_vals, width, label=labels[0])
    ax.bar(x + width / 2, right_vals, width, label=labels[1])
    ax.set_xticks(x, _LEVEL_NAMES)
    ax.legend(fontsize=8)


def render_report_figures(report: StratumReport, outdir: str | Path) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []

    fig, ax = plt.subplots(figsize=(5.0, 3.2), dpi=150)
    _bar_pair(
        ax,
        [report.by_oracle[level].composition for level in _LEVELS],
        [report.by_routed[level].composition for level in _LEVELS],
        ("oracle stratum", "routed stratum"),
    )
    ax.set_ylabel("share of queries")
    ax.set_title("stratum composition")
    paths.append(_save(fig, outdir / "composition.png"))

    fig, ax = plt.subplots(figsize=(5.0, 3.2), dpi=150)
    _bar_pair(
        ax,
        [report.by_oracle[level].random_success for level in _LEVELS],
        [report.by_routed[level].accuracy for level in _LEVELS],
        ("random-context success (oracle)", "pipeline accuracy (routed)"),
    )
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("rate")
    ax.set_title("success rates by stratum")
    paths.append(_save(fig, outdir / "success_rates.png"))

    fig, axes = plt.subplots(1, 2, figsize=(7.5, 3.2), dpi=150)
    x = np.arange(len(_LEVELS))
    rejection = [
        np.nan if report.by_routed[level].rejection_rate is None
        else report.by_routed[level].rejection_rate
        for level in _LEVELS
    ]
    attempts = [
        np.nan if report.by_routed[level].avg_attempts is None
        else report.by_routed[level].avg_attempts
        for level in _LEVELS
    ]
    axes[0].bar(x, rejection, 0.6)
    axes[0].set_xticks(x, _LEVEL_NAMES)
    axes[0].set_title("rejection rate (routed)")
    axes[1].bar(x, attempts, 0.6)
    axes[1].set_xticks(x, _LEVEL_NAMES)
    axes[1].set_title("avg attempts, accepted only")
    paths.append(_save(fig, outdir / "sampling_cost.png"))
    return paths


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    # Scrub creation metadata so repeated runs write identical bytes.
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path
