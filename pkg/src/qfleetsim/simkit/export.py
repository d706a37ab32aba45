"""Run artifacts: events.jsonl, jobs.csv, summary.json with stable field ordering."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .engine import RunLog

JOB_FIELDS = [
    "job_id",
    "tenant_id",
    "status",
    "reject_reason",
    "cancel_reason",
    "qpu_id",
    "policy",
    "shots",
    "submit_us",
    "start_us",
    "complete_us",
    "wait_us",
    "turnaround_us",
    "exec_us",
    "estimated_duration_us",
    "predicted_duration_us",
    "predicted_fidelity",
    "swap_overhead",
    "exec_count",
    "parity_error",
    "zne_estimate",
    "tags",
]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def export(log: RunLog, out_dir: str | Path) -> dict[str, Path]:
    """Write the three run artifacts; identical logs produce byte-identical files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    events_path = out / "events.jsonl"
    with events_path.open("w", encoding="utf-8", newline="\n") as fh:
        for ev in log.events:
            fh.write(json.dumps(ev.as_dict(), sort_keys=True, separators=(",", ":")))
            fh.write("\n")

    jobs_path = out / "jobs.csv"
    with jobs_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(JOB_FIELDS)
        for row in log.jobs:
            writer.writerow([_cell(row.get(field)) for field in JOB_FIELDS])

    summary_path = out / "summary.json"
    payload = {"seed": log.seed, **log.summary.as_dict()}
    summary_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    return {"events": events_path, "jobs": jobs_path, "summary": summary_path}


def summary_csv(log: RunLog, out_dir: str | Path) -> Path:
    """One row per policy/QPU: utilization next to the run-level aggregates."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "summary.csv"
    s = log.summary
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [
                "policy",
                "qpu_id",
                "utilization",
                "busy_us",
                "mean_wait_us",
                "p95_wait_us",
                "mean_turnaround_us",
                "throughput_jobs_per_s",
                "cancelled",
                "mean_predicted_fidelity",
            ]
        )
        for qid in sorted(s.qpu_utilization):
            writer.writerow(
                [
                    s.policy,
                    qid,
                    _cell(s.qpu_utilization[qid]),
                    s.qpu_busy_us[qid],
                    _cell(s.mean_wait_us),
                    _cell(s.p95_wait_us),
                    _cell(s.mean_turnaround_us),
                    _cell(s.throughput_jobs_per_s),
                    s.cancelled,
                    _cell(s.mean_predicted_fidelity),
                ]
            )
    return path
