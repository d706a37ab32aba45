"""Discrete-event engine, scenario definition, persistence, and log validation."""

from .engine import RunLog, Simulation, run
from .events import Event, EventKind
from .export import export, summary_csv
from .rng import substream
from .scenario import (
    QpuSpec,
    Scenario,
    ScenarioInvalid,
    SimConfig,
    WorkloadParams,
    generate_workload,
    ghz_qasm,
    load_job,
    load_scenario,
    random_qasm,
)
from .validate import validate_events

__all__ = [
    "Event",
    "EventKind",
    "QpuSpec",
    "RunLog",
    "Scenario",
    "ScenarioInvalid",
    "SimConfig",
    "Simulation",
    "WorkloadParams",
    "export",
    "generate_workload",
    "ghz_qasm",
    "load_job",
    "load_scenario",
    "random_qasm",
    "run",
    "substream",
    "summary_csv",
    "validate_events",
]
