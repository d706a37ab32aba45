"""Command line interface: run scenarios, validate submissions, print reports."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from .errors import QFleetError
from .gateway import validate_job
from .simkit import ScenarioInvalid, export, load_job, load_scenario, run, summary_csv

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

log = logging.getLogger("qfleetsim")


def _setup_logging() -> None:
    level = os.environ.get("QFS_LOG_LEVEL", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qfleetsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a scenario and export its artifacts")
    p_run.add_argument("--scenario", required=True, help="scenario TOML file")
    p_run.add_argument("--policy", choices=("sjf", "rr", "bff", "prio"), help="override scenario policy")
    p_run.add_argument("--seed", type=int, help="override scenario seed")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument(
        "--sweep",
        help="comma-separated extra seeds; each run exports to <out>/seed-<n>/",
    )

    p_submit = sub.add_parser("submit", help="validate a job file (exit 0 if admissible)")
    p_submit.add_argument("--job", required=True, help="job TOML file")

    p_report = sub.add_parser("report", help="print the summary table for a run directory")
    p_report.add_argument("--in", dest="in_dir", required=True, help="directory with summary.json")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    if args.policy:
        scenario = dataclasses.replace(scenario, policy=args.policy)
    seeds = [args.seed if args.seed is not None else scenario.seed]
    if args.sweep:
        seeds += [int(s) for s in args.sweep.split(",") if s.strip()]
    multi = len(seeds) > 1
    for seed in seeds:
        out_dir = Path(args.out) / f"seed-{seed}" if multi else Path(args.out)
        run_log = run(dataclasses.replace(scenario, seed=seed))
        export(run_log, out_dir)
        summary_csv(run_log, out_dir)
        s = run_log.summary
        print(
            f"seed {seed}: policy={s.policy} jobs={s.total_jobs} completed={s.completed} "
            f"cancelled={s.cancelled} mean_wait={s.mean_wait_us:.1f}us "
            f"throughput={s.throughput_jobs_per_s:.2f}/s -> {out_dir}"
        )
    return EXIT_OK


def _cmd_submit(args: argparse.Namespace) -> int:
    spec = load_job(args.job)
    report, _ = validate_job(spec)
    if report.ok:
        print(f"{spec.job_id}: valid")
        return EXIT_OK
    for v in report.violations:
        print(f"{spec.job_id}: {v.kind}({v.field}): {v.message}")
    return EXIT_VALIDATION


def _cmd_report(args: argparse.Namespace) -> int:
    summary_path = Path(args.in_dir) / "summary.json"
    if not summary_path.exists():
        raise QFleetError(f"no summary.json under {args.in_dir}")
    data = json.loads(summary_path.read_text())
    rows = [
        ("policy", data["policy"]),
        ("seed", data["seed"]),
        ("jobs", data["total_jobs"]),
        ("completed", data["completed"]),
        ("cancelled", data["cancelled"]),
        ("mean wait (us)", f"{data['mean_wait_us']:.1f}"),
        ("p95 wait (us)", f"{data['p95_wait_us']:.1f}"),
        ("mean turnaround (us)", f"{data['mean_turnaround_us']:.1f}"),
        ("throughput (jobs/s)", f"{data['throughput_jobs_per_s']:.3f}"),
        ("mean predicted fidelity", f"{data['mean_predicted_fidelity']:.4f}"),
    ]
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        print(f"{name:<{width}}  {value}")
    print(f"{'utilization':<{width}}")
    for qid, util in data["qpu_utilization"].items():
        print(f"  {qid:<{width - 2}}  {util:.4f}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "submit":
            return _cmd_submit(args)
        return _cmd_report(args)
    except ScenarioInvalid as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except QFleetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
