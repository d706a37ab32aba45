"""Job queue policies: feasibility filtering, SJF, round-robin, best-fit, priority aging."""

from __future__ import annotations

from dataclasses import dataclass

from .circuit import CircuitIR, CircuitProfile
from .errors import QFleetError
from .fleet import CalibrationSnapshot, QpuDescriptor, QpuState
from .gateway import JobSpec
from .transpiler import TranspileResult, transpile, trial_transpile

POLICY_NAMES = ("sjf", "rr", "bff", "prio")

CANCEL_WAIT_EXCEEDED = "WaitExceeded"
CANCEL_INFEASIBLE = "Infeasible"

DEFAULT_AGING_QUANTUM = 100_000  # µs per priority bonus step
TRIAL_CANDIDATE_CAP = 8


class SchedulerError(QFleetError):
    pass


@dataclass
class QueueEntry:
    """A queued job plus everything policies need to rank it."""

    spec: JobSpec
    ir: CircuitIR
    profile: CircuitProfile
    tags: frozenset[str]
    enqueue_time: int
    estimated_duration: float  # busy-time estimate, refined by QoS feedback at enqueue
    effective_priority: int = 0

    @property
    def job_id(self) -> str:
        return self.spec.job_id

    @property
    def required_qubits(self) -> int:
        # static analysis knows the exact qubit count; never trust a smaller claim
        return max(self.spec.constraints.required_qubits, self.profile.num_qubits)


@dataclass(frozen=True)
class QpuView:
    """The scheduler's knowledge of one QPU at decision time (latest snapshot)."""

    qpu_id: str
    descriptor: QpuDescriptor
    snapshot: CalibrationSnapshot
    busy: bool

    @property
    def state(self) -> QpuState:
        return self.snapshot.state

    @property
    def mean_f2q(self) -> float:
        return self.snapshot.mean_f2q

    @property
    def num_qubits(self) -> int:
        return self.descriptor.num_qubits


@dataclass(frozen=True)
class ScheduleDecision:
    job_id: str
    qpu_id: str
    policy_name: str
    start_time: int
    predicted_duration: float
    predicted_fidelity: float
    swap_overhead: int


def feasible(entry: QueueEntry, view: QpuView) -> bool:
    return (
        view.state is QpuState.ONLINE
        and not view.busy
        and view.num_qubits >= entry.required_qubits
        and view.mean_f2q >= entry.spec.constraints.min_two_qubit_fidelity
    )


def feasibility_filter(entry: QueueEntry, views: list[QpuView]) -> list[str]:
    """QPUs that are online, idle, large enough, and meet the fidelity floor."""
    return sorted(v.qpu_id for v in views if feasible(entry, v))


def place(
    entry: QueueEntry,
    candidates: list[QpuView],
    trial_placement: bool = True,
    candidate_cap: int = TRIAL_CANDIDATE_CAP,
) -> tuple[str, TranspileResult]:
    """Pick a QPU among feasible candidates and return its routed circuit.

    With trial placement on, every candidate (up to the cap) is trial-routed
    and the one with the fewest SWAPs wins, ties by lowest qpu_id; past the cap
    the choice falls back to highest snapshot mean 2q fidelity. With trial
    placement off, the lowest qpu_id wins.
    """
    if not candidates:
        raise SchedulerError("place() requires a non-empty candidate list")
    ordered = sorted(candidates, key=lambda v: v.qpu_id)
    if not trial_placement:
        chosen = ordered[0]
    elif len(ordered) > candidate_cap:
        chosen = min(ordered, key=lambda v: (-v.mean_f2q, v.qpu_id))
    else:
        ranked = trial_transpile(entry.ir, [(v.descriptor, v.snapshot) for v in ordered])
        by_id = {qpu_id: tr for qpu_id, tr in ranked}
        best_id = min(by_id, key=lambda qpu_id: (by_id[qpu_id].swap_count, qpu_id))
        return best_id, by_id[best_id]
    view = next(v for v in ordered if v.qpu_id == chosen.qpu_id)
    return view.qpu_id, transpile(entry.ir, view.descriptor, view.snapshot.calibration)


def _decide(entry: QueueEntry, qpu_id: str, tr: TranspileResult, policy: str, now: int) -> ScheduleDecision:
    return ScheduleDecision(
        job_id=entry.job_id,
        qpu_id=qpu_id,
        policy_name=policy,
        start_time=now,
        predicted_duration=tr.predicted_duration,
        predicted_fidelity=tr.predicted_fidelity,
        swap_overhead=tr.swap_count,
    )


def _candidates(entry: QueueEntry, views: list[QpuView]) -> list[QpuView]:
    return [v for v in views if feasible(entry, v)]


def select_sjf(
    queue: list[QueueEntry],
    views: list[QpuView],
    now: int,
    trial_placement: bool = True,
) -> tuple[ScheduleDecision, TranspileResult] | None:
    """Shortest estimated duration first among entries with a feasible idle QPU."""
    runnable = [e for e in queue if _candidates(e, views)]
    if not runnable:
        return None
    entry = min(runnable, key=lambda e: (e.estimated_duration, e.job_id))
    qpu_id, tr = place(entry, _candidates(entry, views), trial_placement)
    return _decide(entry, qpu_id, tr, "sjf", now), tr


def select_best_fit_fidelity(entry: QueueEntry, candidates: list[QpuView]) -> str:
    """The feasible QPU with the smallest fidelity surplus over the requirement."""
    if not candidates:
        raise SchedulerError("best-fit requires a non-empty feasible set")
    required = entry.spec.constraints.min_two_qubit_fidelity
    return min(candidates, key=lambda v: (v.mean_f2q - required, v.qpu_id)).qpu_id


def select_bff(
    queue: list[QueueEntry],
    views: list[QpuView],
    now: int,
) -> tuple[ScheduleDecision, TranspileResult] | None:
    """FIFO job order with best-fit-fidelity QPU choice."""
    runnable = [e for e in queue if _candidates(e, views)]
    if not runnable:
        return None
    entry = min(runnable, key=lambda e: (e.enqueue_time, e.job_id))
    cands = _candidates(entry, views)
    qpu_id = select_best_fit_fidelity(entry, cands)
    view = next(v for v in cands if v.qpu_id == qpu_id)
    tr = transpile(entry.ir, view.descriptor, view.snapshot.calibration)
    return _decide(entry, qpu_id, tr, "bff", now), tr


@dataclass
class RoundRobinCursor:
    """Persistent position in the fleet's qpu_id order."""

    qpu_ids: tuple[str, ...]
    position: int = 0

    def __post_init__(self) -> None:
        self.qpu_ids = tuple(sorted(self.qpu_ids))

    def cycle(self) -> list[str]:
        n = len(self.qpu_ids)
        return [self.qpu_ids[(self.position + i) % n] for i in range(n)]

    def advance_past(self, qpu_id: str) -> None:
        self.position = (self.qpu_ids.index(qpu_id) + 1) % len(self.qpu_ids)


def select_round_robin(
    queue: list[QueueEntry],
    views: list[QpuView],
    now: int,
    cursor: RoundRobinCursor,
) -> tuple[ScheduleDecision, TranspileResult] | None:
    """FIFO job order; QPUs cycled in qpu_id order starting from the cursor."""
    by_id = {v.qpu_id: v for v in views}
    runnable = [e for e in queue if _candidates(e, views)]
    if not runnable:
        return None
    entry = min(runnable, key=lambda e: (e.enqueue_time, e.job_id))
    for qpu_id in cursor.cycle():
        view = by_id.get(qpu_id)
        if view is not None and feasible(entry, view):
            tr = transpile(entry.ir, view.descriptor, view.snapshot.calibration)
            cursor.advance_past(qpu_id)
            return _decide(entry, qpu_id, tr, "rr", now), tr
    return None


def effective_priority(entry: QueueEntry, now: int, aging_quantum: int = DEFAULT_AGING_QUANTUM) -> int:
    return entry.spec.constraints.priority + (now - entry.enqueue_time) // aging_quantum


def select_priority_aging(
    queue: list[QueueEntry],
    views: list[QpuView],
    now: int,
    aging_quantum: int = DEFAULT_AGING_QUANTUM,
    trial_placement: bool = True,
) -> tuple[ScheduleDecision, TranspileResult] | None:
    """Highest priority-plus-aging bonus first; placement as in SJF."""
    runnable = [e for e in queue if _candidates(e, views)]
    if not runnable:
        return None
    for e in runnable:
        e.effective_priority = effective_priority(e, now, aging_quantum)
    entry = min(runnable, key=lambda e: (-e.effective_priority, e.enqueue_time, e.job_id))
    qpu_id, tr = place(entry, _candidates(entry, views), trial_placement)
    return _decide(entry, qpu_id, tr, "prio", now), tr


def expire_stale(queue: list[QueueEntry], now: int) -> list[QueueEntry]:
    """Remove entries whose wait strictly exceeds their max_queue_wait."""
    expired = [
        e
        for e in queue
        if e.spec.constraints.max_queue_wait is not None
        and now - e.enqueue_time > e.spec.constraints.max_queue_wait
    ]
    for e in expired:
        queue.remove(e)
    return expired
