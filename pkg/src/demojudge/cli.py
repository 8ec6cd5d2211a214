"""Command-line surface.

Subcommands cover the whole workflow: ``stratify`` (offline difficulty
trials), ``plan-budgets`` (closed-form budget table), ``tune`` (acceptance
threshold grid search), ``infer`` (the routed sample-and-judge run),
``report`` (tables, records, and figures from an outcome log), and
``verify-theory`` (the empirical guarantee suite).  Exit codes: 0 on success,
2 on configuration errors, 3 when verification checks fail.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml

from . import io, pipeline
from .config import (
    RunConfig,
    apply_overrides,
    config_to_mapping,
    default_config,
    parse_config,
)
from .core import ConfigurationError
from .verify import manifest_rows, manifest_text, run_verification

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-c", "--config", help="run config YAML (defaults apply if omitted)")
    parser.add_argument("-o", "--output-dir", help="override output directory")
    parser.add_argument("--seed", type=int, help="override run seed")
    parser.add_argument("--parallelism", type=int, help="override worker count")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="PATH=VALUE",
        help="override any config field, e.g. --set population.size=5000",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="demojudge",
        description="difficulty-stratified budgeted sample-and-judge demonstration selection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    _add_common(sub.add_parser("stratify", help="estimate difficulty profiles offline"))
    plan = sub.add_parser("plan-budgets", help="closed-form budget plan for a miss target")
    _add_common(plan)
    plan.add_argument("--delta", type=float, default=0.05, help="target miss probability")
    _add_common(sub.add_parser("tune", help="grid-search acceptance thresholds"))
    _add_common(sub.add_parser("infer", help="run the routed sample-and-judge pipeline"))
    report = sub.add_parser("report", help="aggregate an outcome log into reports")
    _add_common(report)
    report.add_argument("--outcomes", help="outcome log path (default: <output_dir>/outcomes.jsonl)")
    _add_common(sub.add_parser("verify-theory", help="run the empirical guarantee suite"))
    return parser


def _load(args: argparse.Namespace) -> RunConfig:
    if args.config:
        raw_text = Path(args.config).read_text(encoding="utf-8")
        mapping = yaml.safe_load(raw_text) or {}
        if not isinstance(mapping, dict):
            raise ConfigurationError("config root must be a mapping")
    else:
        mapping = config_to_mapping(default_config())
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.output_dir is not None:
        overrides.append(f"output_dir={args.output_dir}")
    if args.parallelism is not None:
        overrides.append(f"parallelism={args.parallelism}")
    if overrides:
        mapping = apply_overrides(mapping, overrides)
    return parse_config(mapping)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
    except (ConfigurationError, OSError, yaml.YAMLError) as exc:
        print(json.dumps({"error": "config", "detail": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        pipeline.write_effective_config(cfg, outdir)
        if args.command == "stratify":
            profiles = pipeline.run_stratify(cfg, outdir)
            print(f"stratified {len(profiles)} queries -> {outdir}/profiles.jsonl")
        elif args.command == "plan-budgets":
            plan = pipeline.run_plan_budgets(cfg, outdir, args.delta)
            print((outdir / "budget_plan.txt").read_text(encoding="utf-8"), end="")
            print(f"minimum budgets at delta={plan.delta}: K_L2={plan.k_l2}, K_L3={plan.k_l3}")
        elif args.command == "tune":
            tuned = pipeline.run_tune(cfg, outdir)
            taus = tuned.acceptance
            print(
                f"tuned thresholds tau_l1={taus.tau_l1} tau_l2={taus.tau_l2} "
                f"tau_l3={taus.tau_l3} -> {outdir}/config.tuned.yaml"
            )
        elif args.command == "infer":
            outcomes = pipeline.run_infer(cfg, outdir)
            print(f"ran {len(outcomes)} queries -> {outdir}/outcomes.jsonl")
        elif args.command == "report":
            report = pipeline.run_report(cfg, outdir, getattr(args, "outcomes", None))
            print((outdir / "report.txt").read_text(encoding="utf-8"), end="")
            del report
        elif args.command == "verify-theory":
            results = run_verification(cfg)
            io.write_jsonl(outdir / "verify_manifest.jsonl", manifest_rows(results), io.SCHEMAS["verify"])
            text = manifest_text(results)
            io.write_text(outdir / "verify.txt", text)
            print(text, end="")
            if any(not r.passed for r in results):
                return EXIT_VERIFY
    except ConfigurationError as exc:
        print(json.dumps({"error": "config", "detail": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
