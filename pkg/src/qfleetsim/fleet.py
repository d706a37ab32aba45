"""QPU fleet model: topology, calibration state, drift, and the hardware monitor."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .circuit.analysis import FleetNominal
from .errors import QFleetError


class QpuState(Enum):
    ONLINE = "online"
    OFFLINE = "offline"
    RECALIBRATING = "recalibrating"


ALLOWED_TRANSITIONS = frozenset(
    {
        (QpuState.ONLINE, QpuState.OFFLINE),
        (QpuState.OFFLINE, QpuState.ONLINE),
        (QpuState.ONLINE, QpuState.RECALIBRATING),
        (QpuState.OFFLINE, QpuState.RECALIBRATING),
        (QpuState.RECALIBRATING, QpuState.ONLINE),
    }
)


class FleetConfigError(QFleetError):
    """A QPU definition violates its structural invariants."""


class InvalidStateTransition(QFleetError):
    pass


class AlreadyRecalibrating(QFleetError):
    pass


def normalize_edge(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class CalibrationData:
    """One QPU's calibration: per-qubit/edge fidelities, timings, coherence, readout."""

    f1q: tuple[float, ...]
    f2q: dict[tuple[int, int], float]
    t_1q: float
    t_2q: float
    t_ro: float
    T1: tuple[float, ...]
    T2: tuple[float, ...]
    readout_eps0: tuple[float, ...]
    readout_eps1: tuple[float, ...]

    def validate(self) -> None:
        n = len(self.f1q)
        if not (len(self.T1) == len(self.T2) == len(self.readout_eps0) == len(self.readout_eps1) == n):
            raise FleetConfigError("per-qubit calibration arrays have mismatched lengths")
        for f in self.f1q:
            if not 0.0 < f <= 1.0:
                raise FleetConfigError(f"1q fidelity {f} outside (0, 1]")
        for e, f in self.f2q.items():
            if e != normalize_edge(*e):
                raise FleetConfigError(f"edge key {e} not normalized")
            if not 0.0 < f <= 1.0:
                raise FleetConfigError(f"2q fidelity {f} outside (0, 1]")
        for t1, t2 in zip(self.T1, self.T2):
            if t1 <= 0 or t2 <= 0:
                raise FleetConfigError("coherence times must be positive")
            if t2 > 2.0 * t1 + 1e-12:
                raise FleetConfigError(f"T2={t2} exceeds 2*T1={2 * t1}")
        for e in list(self.readout_eps0) + list(self.readout_eps1):
            if not 0.0 <= e < 0.5:
                raise FleetConfigError(f"readout error {e} outside [0, 0.5)")
        if min(self.t_1q, self.t_2q, self.t_ro) <= 0:
            raise FleetConfigError("gate durations must be positive")

    @property
    def mean_f2q(self) -> float:
        return sum(self.f2q.values()) / len(self.f2q)

    def copy(self) -> "CalibrationData":
        return replace(self, f1q=tuple(self.f1q), f2q=dict(self.f2q))

    @staticmethod
    def uniform(
        num_qubits: int,
        edges: set[tuple[int, int]],
        f1q: float = 0.999,
        f2q: float = 0.99,
        t_1q: float = 0.05,
        t_2q: float = 0.3,
        t_ro: float = 1.0,
        T1: float = 100_000.0,
        T2: float = 80_000.0,
        eps0: float = 0.01,
        eps1: float = 0.01,
    ) -> "CalibrationData":
        cal = CalibrationData(
            f1q=(f1q,) * num_qubits,
            f2q={normalize_edge(*e): f2q for e in edges},
            t_1q=t_1q,
            t_2q=t_2q,
            t_ro=t_ro,
            T1=(T1,) * num_qubits,
            T2=(T2,) * num_qubits,
            readout_eps0=(eps0,) * num_qubits,
            readout_eps1=(eps1,) * num_qubits,
        )
        cal.validate()
        return cal


@dataclass(frozen=True)
class CalibrationSnapshot:
    """Immutable monitor reading for one QPU at one instant."""

    qpu_id: str
    time: int
    calibration: CalibrationData
    state: QpuState

    @property
    def mean_f2q(self) -> float:
        return self.calibration.mean_f2q


@dataclass(frozen=True)
class DriftParams:
    """Linear decay with Brownian jitter, clamped to [floor, baseline].

    ``rate`` and ``sigma`` are per-millisecond quantities; readout errors drift
    upward under the same law, clamped to [baseline, eps_ceiling].
    """

    rate: float = 1e-5
    sigma: float = 1e-4
    floor: float = 0.5
    eps_ceiling: float = 0.45


@dataclass
class QpuDescriptor:
    """One QPU: static topology plus mutable calibration/state."""

    qpu_id: str
    num_qubits: int
    coupling_edges: frozenset[tuple[int, int]]
    baseline: CalibrationData
    state: QpuState = QpuState.ONLINE
    calibration: CalibrationData = field(init=False)
    last_poll_time: int = field(default=-1, init=False)
    # routing structure per circuit; topology (and hence routing) never changes
    route_cache: dict = field(init=False, default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.num_qubits < 1:
            raise FleetConfigError(f"{self.qpu_id}: num_qubits must be >= 1")
        edges = {normalize_edge(*e) for e in self.coupling_edges}
        object.__setattr__(self, "coupling_edges", frozenset(edges))
        for a, b in edges:
            if a == b or not (0 <= a < self.num_qubits and 0 <= b < self.num_qubits):
                raise FleetConfigError(f"{self.qpu_id}: invalid coupling edge ({a}, {b})")
        if self.num_qubits > 1 and not self._connected(edges):
            raise FleetConfigError(f"{self.qpu_id}: coupling graph is not connected")
        self.baseline.validate()
        if set(self.baseline.f2q) != edges:
            raise FleetConfigError(f"{self.qpu_id}: f2q keys do not match coupling edges")
        if len(self.baseline.f1q) != self.num_qubits:
            raise FleetConfigError(f"{self.qpu_id}: f1q length does not match num_qubits")
        self.calibration = self.baseline.copy()

    def _connected(self, edges: set[tuple[int, int]]) -> bool:
        adj: dict[int, list[int]] = {q: [] for q in range(self.num_qubits)}
        for a, b in edges:
            adj[a].append(b)
            adj[b].append(a)
        seen = {0}
        stack = [0]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == self.num_qubits

    @property
    def adjacency(self) -> dict[int, tuple[int, ...]]:
        adj: dict[int, list[int]] = {q: [] for q in range(self.num_qubits)}
        for a, b in sorted(self.coupling_edges):
            adj[a].append(b)
            adj[b].append(a)
        return {q: tuple(sorted(nbs)) for q, nbs in adj.items()}

    def degree(self, qubit: int) -> int:
        return sum(1 for e in self.coupling_edges if qubit in e)

    def set_state(self, new: QpuState) -> None:
        if new is self.state:
            return
        if (self.state, new) not in ALLOWED_TRANSITIONS:
            raise InvalidStateTransition(f"{self.qpu_id}: {self.state.value} -> {new.value}")
        self.state = new


def poll(qpu: QpuDescriptor, now: int) -> CalibrationSnapshot:
    """Publish an immutable snapshot of the QPU's current calibration and state."""
    if now < qpu.last_poll_time:
        raise FleetConfigError(f"{qpu.qpu_id}: poll time moved backwards ({now} < {qpu.last_poll_time})")
    qpu.last_poll_time = now
    return CalibrationSnapshot(qpu.qpu_id, now, qpu.calibration.copy(), qpu.state)


def drift_step(qpu: QpuDescriptor, dt: int, rng: np.random.Generator, params: DriftParams) -> None:
    """Advance calibration by ``dt`` microseconds of decay plus jitter.

    Fidelities decay toward ``params.floor``; readout errors climb toward
    ``params.eps_ceiling``. Values never cross their baseline in the improving
    direction. Draw order is fixed (f1q by qubit, f2q by sorted edge, eps0 then
    eps1 by qubit) so results are reproducible for a given generator state.
    Calibration is frozen while the QPU recalibrates.
    """
    if dt <= 0:
        raise FleetConfigError("drift dt must be positive")
    if qpu.state is QpuState.RECALIBRATING:
        return
    dt_ms = dt / 1000.0
    decay = params.rate * dt_ms
    scale = params.sigma * math.sqrt(dt_ms)

    def jitter() -> float:
        return float(rng.normal(0.0, scale)) if params.sigma > 0 else 0.0

    cal, base = qpu.calibration, qpu.baseline
    f1q = tuple(
        min(base.f1q[q], max(params.floor, cal.f1q[q] - decay + jitter()))
        for q in range(qpu.num_qubits)
    )
    f2q = {
        e: min(base.f2q[e], max(params.floor, cal.f2q[e] - decay + jitter()))
        for e in sorted(cal.f2q)
    }
    eps0 = tuple(
        max(base.readout_eps0[q], min(params.eps_ceiling, cal.readout_eps0[q] + decay + jitter()))
        for q in range(qpu.num_qubits)
    )
    eps1 = tuple(
        max(base.readout_eps1[q], min(params.eps_ceiling, cal.readout_eps1[q] + decay + jitter()))
        for q in range(qpu.num_qubits)
    )
    qpu.calibration = replace(cal, f1q=f1q, f2q=f2q, readout_eps0=eps0, readout_eps1=eps1)


def begin_recalibration(qpu: QpuDescriptor) -> None:
    """Enter the recalibrating state; the scheduler must not use the QPU until done."""
    if qpu.state is QpuState.RECALIBRATING:
        raise AlreadyRecalibrating(qpu.qpu_id)
    qpu.set_state(QpuState.RECALIBRATING)


def finish_recalibration(qpu: QpuDescriptor) -> None:
    """Restore baseline calibration and return the QPU to service."""
    if qpu.state is not QpuState.RECALIBRATING:
        raise InvalidStateTransition(f"{qpu.qpu_id}: not recalibrating")
    qpu.calibration = qpu.baseline.copy()
    qpu.set_state(QpuState.ONLINE)


def nearest_rank_percentile(values: list[float], q: float) -> float:
    """Nearest-rank percentile (deterministic, no interpolation)."""
    if not values:
        raise ValueError("empty sample")
    ordered = sorted(values)
    rank = max(1, math.ceil(q * len(ordered)))
    return ordered[rank - 1]


def fleet_nominal(qpus: list[QpuDescriptor], kappa: float = 0.5) -> FleetNominal:
    """Fleet-wide reference values for the circuit tagger (from baselines)."""
    if not qpus:
        raise FleetConfigError("fleet is empty")
    min_t2 = min(min(q.baseline.T2) for q in qpus)
    p90 = nearest_rank_percentile([q.baseline.mean_f2q for q in qpus], 0.9)
    return FleetNominal(min_t2=min_t2, p90_mean_f2q=p90, kappa=kappa)
