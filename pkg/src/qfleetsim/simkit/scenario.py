"""Scenario definition: fleet, workload, policy, and tunables, plus the TOML loader."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..circuit import GateKind
from ..errors import QFleetError
from ..executor import MAX_MEASURED_BITS, OutcomeDistribution
from ..fleet import CalibrationData, DriftParams, QpuDescriptor, normalize_edge
from ..gateway import JobConstraints, JobSpec
from ..scheduler import DEFAULT_AGING_QUANTUM, POLICY_NAMES
from .rng import substream


class ScenarioInvalid(QFleetError):
    pass


@dataclass(frozen=True)
class SimConfig:
    """Engine tunables; every field is overridable from the scenario [config] section."""

    kappa: float = 0.5
    beta: float = 0.2
    aging_quantum: int = DEFAULT_AGING_QUANTUM
    poll_interval: int = 10_000
    drift_interval: int = 10_000
    d_recal: int = 1_000_000
    drift: DriftParams = field(default_factory=DriftParams)
    zne_lambdas: tuple[float, ...] = (1.0, 2.0)
    mitigation: bool = True
    trial_placement: bool = True
    max_pending: int = 100
    quotas: dict[str, int] = field(default_factory=dict)
    health_window: int = 20
    health_min_obs: int = 10
    health_threshold: float = 0.15


def _per_qubit(value, n: int, what: str) -> tuple[float, ...]:
    if isinstance(value, (int, float)):
        return (float(value),) * n
    values = tuple(float(v) for v in value)
    if len(values) != n:
        raise ScenarioInvalid(f"fleet.{what}: expected {n} values, got {len(values)}")
    return values


@dataclass(frozen=True)
class QpuSpec:
    """Buildable QPU definition; a fresh mutable descriptor per run keeps replays exact."""

    qpu_id: str
    num_qubits: int
    edges: tuple[tuple[int, int], ...]
    f1q: object = 0.999
    f2q: object = 0.99  # scalar, or list of [u, v, fidelity] overrides on top of a scalar
    t_1q: float = 0.05
    t_2q: float = 0.3
    t_ro: float = 1.0
    T1: object = 100_000.0
    T2: object = 80_000.0
    eps0: object = 0.01
    eps1: object = 0.01

    def build(self) -> QpuDescriptor:
        n = self.num_qubits
        edges = {normalize_edge(int(a), int(b)) for a, b in self.edges}
        if isinstance(self.f2q, (int, float)):
            f2q = {e: float(self.f2q) for e in edges}
        else:
            f2q = {}
            for item in self.f2q:
                u, v, fid = item
                key = normalize_edge(int(u), int(v))
                if key not in edges:
                    raise ScenarioInvalid(f"fleet.f2q: ({u}, {v}) is not a coupling edge")
                f2q[key] = float(fid)
            missing = edges - set(f2q)
            if missing:
                raise ScenarioInvalid(f"fleet.f2q: no fidelity given for edges {sorted(missing)}")
        cal = CalibrationData(
            f1q=_per_qubit(self.f1q, n, "f1q"),
            f2q=f2q,
            t_1q=float(self.t_1q),
            t_2q=float(self.t_2q),
            t_ro=float(self.t_ro),
            T1=_per_qubit(self.T1, n, "T1"),
            T2=_per_qubit(self.T2, n, "T2"),
            readout_eps0=_per_qubit(self.eps0, n, "eps0"),
            readout_eps1=_per_qubit(self.eps1, n, "eps1"),
        )
        return QpuDescriptor(self.qpu_id, n, frozenset(edges), cal)


@dataclass(frozen=True)
class WorkloadParams:
    """Synthetic workload definition: arrival law, circuit family, constraint ranges."""

    count: int = 1
    arrival: str = "poisson"  # or "fixed"
    rate_per_s: float = 100.0
    times: tuple[int, ...] = ()
    family: str = "ghz"  # or "random"
    num_qubits: int = 2
    depth: int = 8  # random family only
    shots: int = 256
    min_two_qubit_fidelity: tuple[float, float] = (0.9, 0.9)
    required_qubits: int | None = None  # defaults to the circuit's qubit count
    max_queue_wait: int | None = None
    priority: tuple[int, int] = (5, 5)
    tenants: tuple[str, ...] = ("tenant-0",)
    mitigate: bool = True


@dataclass(frozen=True)
class Scenario:
    seed: int
    qpus: tuple[QpuSpec, ...]
    workload: WorkloadParams | None
    policy: str = "sjf"
    config: SimConfig = field(default_factory=SimConfig)
    explicit_jobs: tuple[JobSpec, ...] | None = None

    def validate(self) -> None:
        if self.policy not in POLICY_NAMES:
            raise ScenarioInvalid(f"policy.name: unknown policy {self.policy!r}")
        if not self.qpus:
            raise ScenarioInvalid("fleet: at least one QPU is required")
        ids = [q.qpu_id for q in self.qpus]
        if len(set(ids)) != len(ids):
            raise ScenarioInvalid("fleet: duplicate qpu_id")
        if self.explicit_jobs is not None:
            if not self.explicit_jobs:
                raise ScenarioInvalid("workload: at least one job is required")
        elif self.workload is None or self.workload.count < 1:
            raise ScenarioInvalid("workload.count: at least one job is required")
        if self.workload is not None:
            w = self.workload
            if w.arrival not in ("poisson", "fixed"):
                raise ScenarioInvalid(f"workload.arrival: unknown law {w.arrival!r}")
            if w.arrival == "fixed" and len(w.times) != w.count:
                raise ScenarioInvalid("workload.times: length must equal workload.count")
            if w.arrival == "poisson" and w.rate_per_s <= 0:
                raise ScenarioInvalid("workload.rate_per_s: must be positive")
            if w.family not in ("ghz", "random"):
                raise ScenarioInvalid(f"workload.family: unknown family {w.family!r}")
            if w.num_qubits < 1:
                raise ScenarioInvalid("workload.num_qubits: must be >= 1")
            if w.num_qubits > MAX_MEASURED_BITS:
                raise ScenarioInvalid(f"workload.num_qubits: capped at {MAX_MEASURED_BITS} measured bits")
            if w.shots < 1:
                raise ScenarioInvalid("workload.shots: must be >= 1")
        if len(self.config.zne_lambdas) >= 2:
            from ..executor import DegenerateLambdas, ZneConfig

            try:
                ZneConfig.richardson(self.config.zne_lambdas)
            except DegenerateLambdas as exc:
                raise ScenarioInvalid(f"config.zne_lambdas: {exc}") from exc
        if self.config.poll_interval < 1:
            raise ScenarioInvalid("config.poll_interval: must be >= 1 microsecond")
        if self.config.drift_interval < 0:
            raise ScenarioInvalid("config.drift_interval: must be >= 0 (0 disables drift)")

    def jobs(self) -> list[JobSpec]:
        if self.explicit_jobs is not None:
            return list(self.explicit_jobs)
        return generate_workload(self.workload, substream(self.seed, "workload"))


def ghz_qasm(n: int) -> str:
    lines = ["OPENQASM 2.0;", f"qreg q[{n}];", f"creg c[{n}];", "h q[0];"]
    lines += [f"cx q[{i}],q[{i + 1}];" for i in range(n - 1)]
    lines += [f"measure q[{i}] -> c[{i}];" for i in range(n)]
    return "\n".join(lines) + "\n"


_RANDOM_1Q = (GateKind.H, GateKind.X, GateKind.Y, GateKind.Z, GateKind.S, GateKind.T)
_RANDOM_ROT = (GateKind.RX, GateKind.RY, GateKind.RZ)


def random_qasm(n: int, depth: int, rng: np.random.Generator) -> str:
    lines = ["OPENQASM 2.0;", f"qreg q[{n}];", f"creg c[{n}];"]
    for _ in range(depth):
        roll = rng.random()
        if n >= 2 and roll < 0.4:
            a, b = rng.choice(n, size=2, replace=False)
            kind = GateKind.CX if rng.random() < 0.8 else GateKind.CZ
            lines.append(f"{kind.value} q[{a}],q[{b}];")
        elif roll < 0.7:
            q = int(rng.integers(n))
            lines.append(f"{_RANDOM_1Q[int(rng.integers(len(_RANDOM_1Q)))].value} q[{q}];")
        else:
            q = int(rng.integers(n))
            kind = _RANDOM_ROT[int(rng.integers(len(_RANDOM_ROT)))]
            angle = float(rng.uniform(-3.141592653589793, 3.141592653589793))
            lines.append(f"{kind.value}({angle!r}) q[{q}];")
    lines += [f"measure q[{i}] -> c[{i}];" for i in range(n)]
    return "\n".join(lines) + "\n"


def generate_workload(params: WorkloadParams, rng: np.random.Generator) -> list[JobSpec]:
    """Materialize the synthetic workload; deterministic for a given generator."""
    if params.arrival == "fixed":
        arrivals = [int(t) for t in params.times]
    else:
        mean_gap_us = 1e6 / params.rate_per_s
        t = 0.0
        arrivals = []
        for _ in range(params.count):
            t += rng.exponential(mean_gap_us)
            arrivals.append(int(t))
    arrivals.sort()

    fid_lo, fid_hi = params.min_two_qubit_fidelity
    prio_lo, prio_hi = params.priority
    jobs = []
    for i, submit in enumerate(arrivals):
        if params.family == "ghz":
            qasm = ghz_qasm(params.num_qubits)
            ideal = OutcomeDistribution.ghz(params.num_qubits)
        else:
            qasm = random_qasm(params.num_qubits, params.depth, rng)
            ideal = OutcomeDistribution.point_mass_zeros(params.num_qubits)
        fid = fid_lo if fid_lo == fid_hi else float(rng.uniform(fid_lo, fid_hi))
        prio = prio_lo if prio_lo == prio_hi else int(rng.integers(prio_lo, prio_hi + 1))
        jobs.append(
            JobSpec(
                job_id=f"job-{i:06d}",
                tenant_id=params.tenants[i % len(params.tenants)],
                qasm_source=qasm,
                shots=params.shots,
                constraints=JobConstraints(
                    min_two_qubit_fidelity=fid,
                    required_qubits=params.required_qubits or params.num_qubits,
                    max_queue_wait=params.max_queue_wait,
                    priority=prio,
                ),
                declared_ideal=ideal,
                submit_time=submit,
                mitigate=params.mitigate,
            )
        )
    return jobs


# ---------------------------------------------------------------------------
# TOML loading


def _section(data: dict, name: str) -> dict:
    value = data.get(name)
    if value is None:
        raise ScenarioInvalid(f"{name}: section is required")
    if not isinstance(value, dict):
        raise ScenarioInvalid(f"{name}: expected a table")
    return value


def _get(table: dict, section: str, key: str, kind, default=None, required: bool = False):
    if key not in table:
        if required:
            raise ScenarioInvalid(f"{section}.{key}: key is required")
        return default
    value = table[key]
    if kind is float and isinstance(value, int):
        value = float(value)
    if kind is not None and not isinstance(value, kind):
        raise ScenarioInvalid(f"{section}.{key}: expected {getattr(kind, '__name__', kind)}, got {value!r}")
    return value


def _range_pair(table: dict, section: str, key: str, default):
    value = table.get(key)
    if value is None:
        return default
    if isinstance(value, (int, float)):
        return (float(value), float(value))
    if isinstance(value, list) and len(value) == 2:
        return (float(value[0]), float(value[1]))
    raise ScenarioInvalid(f"{section}.{key}: expected a number or [low, high]")


def load_scenario(path: str | Path) -> Scenario:
    """Parse and validate a scenario file; errors cite section and key."""
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioInvalid(f"{path}: {exc}") from exc

    seed = data.get("seed")
    if not isinstance(seed, int):
        raise ScenarioInvalid("seed: a 64-bit integer seed is required")

    fleet = _section(data, "fleet")
    qpu_tables = fleet.get("qpu")
    if not isinstance(qpu_tables, list) or not qpu_tables:
        raise ScenarioInvalid("fleet.qpu: at least one [[fleet.qpu]] block is required")
    qpus = []
    for i, table in enumerate(qpu_tables):
        sec = f"fleet.qpu[{i}]"
        edges = _get(table, sec, "edges", list, required=True)
        qpus.append(
            QpuSpec(
                qpu_id=_get(table, sec, "qpu_id", str, required=True),
                num_qubits=_get(table, sec, "num_qubits", int, required=True),
                edges=tuple((int(a), int(b)) for a, b in edges),
                f1q=table.get("f1q", 0.999),
                f2q=table.get("f2q", 0.99),
                t_1q=_get(table, sec, "t_1q", float, 0.05),
                t_2q=_get(table, sec, "t_2q", float, 0.3),
                t_ro=_get(table, sec, "t_ro", float, 1.0),
                T1=table.get("T1", 100_000.0),
                T2=table.get("T2", 80_000.0),
                eps0=table.get("eps0", 0.01),
                eps1=table.get("eps1", 0.01),
            )
        )

    w = _section(data, "workload")
    max_wait = w.get("max_queue_wait")
    if max_wait in (None, "unbounded"):
        max_wait = None
    elif not isinstance(max_wait, int):
        raise ScenarioInvalid("workload.max_queue_wait: expected microseconds or 'unbounded'")
    prio = _range_pair(w, "workload", "priority", (5.0, 5.0))
    workload = WorkloadParams(
        count=_get(w, "workload", "count", int, len(w.get("times", [])) or 1),
        arrival=_get(w, "workload", "arrival", str, "poisson"),
        rate_per_s=_get(w, "workload", "rate_per_s", float, 100.0),
        times=tuple(int(t) for t in w.get("times", [])),
        family=_get(w, "workload", "family", str, "ghz"),
        num_qubits=_get(w, "workload", "num_qubits", int, 2),
        depth=_get(w, "workload", "depth", int, 8),
        shots=_get(w, "workload", "shots", int, 256),
        min_two_qubit_fidelity=_range_pair(w, "workload", "min_two_qubit_fidelity", (0.9, 0.9)),
        required_qubits=_get(w, "workload", "required_qubits", int),
        max_queue_wait=max_wait,
        priority=(int(prio[0]), int(prio[1])),
        tenants=tuple(w.get("tenants", ["tenant-0"])),
        mitigate=_get(w, "workload", "mitigate", bool, True),
    )

    pol = data.get("policy", {})
    policy = _get(pol, "policy", "name", str, "sjf") if isinstance(pol, dict) else "sjf"

    cfg_table = data.get("config", {})
    if not isinstance(cfg_table, dict):
        raise ScenarioInvalid("config: expected a table")
    drift = DriftParams(
        rate=_get(cfg_table, "config", "drift_rate", float, DriftParams.rate),
        sigma=_get(cfg_table, "config", "drift_sigma", float, DriftParams.sigma),
        floor=_get(cfg_table, "config", "fidelity_floor", float, DriftParams.floor),
        eps_ceiling=_get(cfg_table, "config", "eps_ceiling", float, DriftParams.eps_ceiling),
    )
    quotas = cfg_table.get("quotas", {})
    if not isinstance(quotas, dict) or not all(isinstance(v, int) for v in quotas.values()):
        raise ScenarioInvalid("config.quotas: expected a table of tenant -> max_pending")
    config = SimConfig(
        kappa=_get(cfg_table, "config", "kappa", float, 0.5),
        beta=_get(cfg_table, "config", "beta", float, 0.2),
        aging_quantum=_get(cfg_table, "config", "aging_quantum", int, DEFAULT_AGING_QUANTUM),
        poll_interval=_get(cfg_table, "config", "poll_interval", int, 10_000),
        drift_interval=_get(cfg_table, "config", "drift_interval", int, 10_000),
        d_recal=_get(cfg_table, "config", "d_recal", int, 1_000_000),
        drift=drift,
        zne_lambdas=tuple(float(x) for x in cfg_table.get("zne_lambdas", [1.0, 2.0])),
        mitigation=_get(cfg_table, "config", "mitigation", bool, True),
        trial_placement=_get(cfg_table, "config", "trial_placement", bool, True),
        max_pending=_get(cfg_table, "config", "max_pending", int, 100),
        quotas=dict(quotas),
        health_window=_get(cfg_table, "config", "health_window", int, 20),
        health_min_obs=_get(cfg_table, "config", "health_min_obs", int, 10),
        health_threshold=_get(cfg_table, "config", "health_threshold", float, 0.15),
    )

    scenario = Scenario(seed=seed, qpus=tuple(qpus), workload=workload, policy=policy, config=config)
    scenario.validate()
    return scenario


def load_job(path: str | Path) -> JobSpec:
    """Read a single job submission file (fields mirror JobSpec)."""
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioInvalid(f"{path}: {exc}") from exc
    for key in ("job_id", "tenant_id", "qasm_source", "shots", "constraints"):
        if key not in data:
            raise ScenarioInvalid(f"job.{key}: key is required")
    c = data["constraints"]
    max_wait = c.get("max_queue_wait")
    if max_wait in (None, "unbounded"):
        max_wait = None
    ideal = None
    if "declared_ideal" in data:
        d = data["declared_ideal"]
        ideal = OutcomeDistribution(
            num_bits=int(d.get("num_bits", 0)),
            probabilities={str(k): float(v) for k, v in d.get("probabilities", {}).items()},
        )
    return JobSpec(
        job_id=str(data["job_id"]),
        tenant_id=str(data["tenant_id"]),
        qasm_source=str(data["qasm_source"]),
        shots=int(data["shots"]),
        constraints=JobConstraints(
            min_two_qubit_fidelity=float(c.get("min_two_qubit_fidelity", 0.0)),
            required_qubits=int(c.get("required_qubits", 0)),
            max_queue_wait=max_wait,
            priority=int(c.get("priority", -1)),
        ),
        declared_ideal=ideal,
        submit_time=int(data.get("submit_time", 0)),
        mitigate=bool(data.get("mitigate", True)),
    )
