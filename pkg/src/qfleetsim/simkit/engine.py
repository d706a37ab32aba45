"""Discrete-event engine wiring intake, analysis, scheduling, execution, and QoS.

Scheduling passes run on job arrival, job completion, monitor polls, and
recalibration completion. The clock is integer microseconds; every tie is
broken by a creation-ordered sequence number, so a (scenario, seed) pair
replays to a byte-identical event log.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field

from ..circuit import GateDurations, profile as profile_circuit, tag as tag_circuit
from ..errors import QFleetError
from ..executor import (
    ExecutionRecord,
    MitigatedResult,
    OutcomeDistribution,
    QpuBusy,
    QpuNotOnline,
    ZneConfig,
    duration_us,
    parity_expectation,
    run_job,
)
from ..fleet import (
    QpuState,
    begin_recalibration,
    drift_step,
    finish_recalibration,
    fleet_nominal,
    poll,
)
from ..gateway import Gateway, JobSpec, validate_job
from ..qos import (
    EstimatorState,
    JobMetrics,
    QpuHealth,
    SummaryReport,
    circuit_class,
    flag_qpu,
    summarize,
)
from ..scheduler import (
    CANCEL_INFEASIBLE,
    CANCEL_WAIT_EXCEEDED,
    QpuView,
    QueueEntry,
    RoundRobinCursor,
    expire_stale,
    select_bff,
    select_priority_aging,
    select_round_robin,
    select_sjf,
)
from .events import Event, EventKind
from .rng import substream
from .scenario import Scenario
from .validate import validate_events

log = logging.getLogger("qfleetsim.engine")

_ARRIVAL = "arrival"
_COMPLETE = "complete"
_POLL = "poll"
_DRIFT = "drift"
_EXPIRY = "expiry"
_RECAL_END = "recal-end"


@dataclass
class RunLog:
    """Everything one run produced: the event order, per-job records, aggregates."""

    seed: int
    policy: str
    events: list[Event]
    jobs: list[dict]
    summary: SummaryReport
    records: dict[str, ExecutionRecord] = field(default_factory=dict)
    mitigated: dict[str, MitigatedResult] = field(default_factory=dict)
    metrics: dict[str, JobMetrics] = field(default_factory=dict)

    def validate(self) -> list[str]:
        return validate_events([e.as_dict() for e in self.events])


class Simulation:
    def __init__(self, scenario: Scenario):
        scenario.validate()
        self.scenario = scenario
        self.cfg = scenario.config
        self.seed = scenario.seed
        self.policy = scenario.policy
        self.qpus = {spec.qpu_id: spec.build() for spec in scenario.qpus}
        self.qpu_ids = sorted(self.qpus)
        self.gateway = Gateway(default_max_pending=self.cfg.max_pending, quotas=self.cfg.quotas)
        self.nominal = fleet_nominal(list(self.qpus.values()), self.cfg.kappa)
        self.profile_durations = GateDurations(
            t_1q=_mean(q.baseline.t_1q for q in self.qpus.values()),
            t_2q=_mean(q.baseline.t_2q for q in self.qpus.values()),
            t_ro=_mean(q.baseline.t_ro for q in self.qpus.values()),
        )
        self.zne = (
            ZneConfig.richardson(self.cfg.zne_lambdas) if len(self.cfg.zne_lambdas) >= 2 else None
        )
        self.estimator = EstimatorState(beta=self.cfg.beta)
        self.health = {
            qid: QpuHealth(qid, window=self.cfg.health_window, min_observations=self.cfg.health_min_obs)
            for qid in self.qpu_ids
        }
        self.rr_cursor = RoundRobinCursor(tuple(self.qpu_ids))
        self.drift_rng = substream(self.seed, "drift")

        self.now = 0
        self._heap: list[tuple[int, int, str, dict]] = []
        self._seq = 0
        self._pass_needed = False
        self._recover_requested = False
        self.events: list[Event] = []
        self.queue: list[QueueEntry] = []
        self.busy_until: dict[str, int] = {}
        self.recal_until: dict[str, int] = {}
        self.snapshots = {}
        self.arrivals_remaining = 0

        self.job_rows: dict[str, dict] = {}
        self.job_order: list[str] = []
        self._entry_info: dict[str, dict] = {}  # dispatch-time info needed at completion
        self._specs: dict[str, JobSpec] = {}
        self.records: dict[str, ExecutionRecord] = {}
        self.mitigated: dict[str, MitigatedResult] = {}
        self.metrics: dict[str, JobMetrics] = {}
        self.admitted = 0
        self.completed = 0
        self.cancelled = 0
        self.qpu_busy_us = {qid: 0 for qid in self.qpu_ids}
        self.fidelities: list[float] = []

        # static fleet capability: a job beyond these can never run on any QPU
        self.max_fleet_qubits = max(q.num_qubits for q in self.qpus.values())
        self.max_fleet_mean_f2q = max(q.baseline.mean_f2q for q in self.qpus.values())

    # -- plumbing ----------------------------------------------------------

    def _push(self, time: int, action: str, payload: dict) -> None:
        heapq.heappush(self._heap, (time, self._next_seq(), action, payload))

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def _log(self, kind: EventKind, payload: dict) -> None:
        self.events.append(Event(self.now, self._next_seq(), kind, payload))

    def _request_pass(self, recover: bool = False) -> None:
        self._pass_needed = True
        self._recover_requested = self._recover_requested or recover

    def _active(self) -> bool:
        return bool(self.arrivals_remaining or self.queue or self.busy_until or self.recal_until)

    def _exec_count(self, spec: JobSpec) -> int:
        if self.cfg.mitigation and spec.mitigate and self.zne is not None:
            return len(self.zne.lambdas)
        return 1

    # -- run loop ----------------------------------------------------------

    def run(self) -> RunLog:
        jobs = self.scenario.jobs()
        if not jobs:
            raise QFleetError("scenario produced no jobs")
        self._push(0, _POLL, {})
        if self.cfg.drift_interval > 0:
            self._push(self.cfg.drift_interval, _DRIFT, {})
        for spec in jobs:
            self.arrivals_remaining += 1
            self._push(spec.submit_time, _ARRIVAL, {"spec": spec})

        while self._heap:
            time, _, action, payload = heapq.heappop(self._heap)
            if time < self.now:
                raise QFleetError(f"clock moved backwards: {time} < {self.now}")
            self.now = time
            self._dispatch(action, payload)
            # one scheduling pass per instant: simultaneous events (e.g. a batch
            # of arrivals) are all visible before any dispatch decision
            if self._pass_needed and (not self._heap or self._heap[0][0] != self.now):
                recover = self._recover_requested
                self._pass_needed = self._recover_requested = False
                self._schedule_pass(recover=recover)

        if self.admitted != self.completed + self.cancelled:
            raise QFleetError(
                f"conservation violated: {self.admitted} admitted, "
                f"{self.completed} completed + {self.cancelled} cancelled"
            )
        summary = summarize(
            policy=self.policy,
            metrics=[self.metrics[j] for j in self.job_order if j in self.metrics],
            cancelled=self.cancelled,
            qpu_busy_us=self.qpu_busy_us,
            horizon_us=self.now,
            predicted_fidelities=self.fidelities,
        )
        return RunLog(
            seed=self.seed,
            policy=self.policy,
            events=self.events,
            jobs=[self.job_rows[j] for j in self.job_order],
            summary=summary,
            records=self.records,
            mitigated=self.mitigated,
            metrics=self.metrics,
        )

    def _dispatch(self, action: str, payload: dict) -> None:
        if action == _ARRIVAL:
            self._on_arrival(payload["spec"])
        elif action == _COMPLETE:
            self._on_complete(payload["job_id"], payload["qpu_id"])
        elif action == _POLL:
            self._on_poll()
        elif action == _DRIFT:
            self._on_drift()
        elif action == _EXPIRY:
            self._on_expiry(payload["job_id"])
        elif action == _RECAL_END:
            self._on_recal_end(payload["qpu_id"])
        else:  # pragma: no cover
            raise QFleetError(f"unknown action {action!r}")

    # -- handlers ----------------------------------------------------------

    def _on_arrival(self, spec: JobSpec) -> None:
        self.arrivals_remaining -= 1
        report, ir = validate_job(spec)
        admitted = False
        reason = None
        if not report.ok:
            reason = "; ".join(f"{v.kind}({v.field}): {v.message}" for v in report.violations)
        else:
            result = self.gateway.admit(spec)
            admitted = result.admitted
            reason = result.reason

        if spec.job_id not in self.job_rows:
            self.job_rows[spec.job_id] = {
                "job_id": spec.job_id,
                "tenant_id": spec.tenant_id,
                "shots": spec.shots,
                "submit_us": spec.submit_time,
                "status": "queued" if admitted else "rejected",
                "reject_reason": None if admitted else reason,
            }
            self.job_order.append(spec.job_id)
        # a rejected duplicate id must not clobber the original job's row; the
        # rejection stays visible in the event log
        row = self.job_rows[spec.job_id]

        entry = None
        if admitted:
            self.admitted += 1
            prof = profile_circuit(ir, self.profile_durations)
            tags = tag_circuit(prof, spec.constraints.min_two_qubit_fidelity, self.nominal)
            refined = self.estimator.predict_class(circuit_class(prof))
            estimated = refined if refined is not None else prof.estimated_duration * self._exec_count(spec)
            entry = QueueEntry(
                spec=spec,
                ir=ir,
                profile=prof,
                tags=tags,
                enqueue_time=spec.submit_time,
                estimated_duration=estimated,
            )
            self.queue.append(entry)
            row["tags"] = ",".join(sorted(tags))
            row["estimated_duration_us"] = estimated
            if spec.constraints.max_queue_wait is not None:
                self._push(
                    spec.submit_time + spec.constraints.max_queue_wait + 1,
                    _EXPIRY,
                    {"job_id": spec.job_id},
                )

        log.debug("t=%d arrival %s admitted=%s reason=%s", self.now, spec.job_id, admitted, reason)
        self._log(
            EventKind.JOB_ARRIVAL,
            {
                "job_id": spec.job_id,
                "tenant_id": spec.tenant_id,
                "shots": spec.shots,
                "admitted": admitted,
                "reason": reason,
                "required_qubits": entry.required_qubits if entry else spec.constraints.required_qubits,
                "min_two_qubit_fidelity": spec.constraints.min_two_qubit_fidelity,
                "max_queue_wait": spec.constraints.max_queue_wait,
                "priority": spec.constraints.priority,
                "tags": sorted(entry.tags) if entry else [],
                "estimated_duration_us": entry.estimated_duration if entry else None,
            },
        )
        if admitted:
            self._request_pass()

    def _on_poll(self) -> None:
        if self.now > 0 and not self._active():
            return  # all jobs terminal: drop the timer so the run ends at real work
        readings = []
        for qid in self.qpu_ids:
            snap = poll(self.qpus[qid], self.now)
            self.snapshots[qid] = snap
            readings.append(
                {
                    "qpu_id": qid,
                    "state": snap.state.value,
                    "num_qubits": self.qpus[qid].num_qubits,
                    "mean_f2q": snap.mean_f2q,
                }
            )
        self._log(EventKind.MONITOR_POLL, {"snapshots": readings})
        if self._active():
            self._push(self.now + self.cfg.poll_interval, _POLL, {})
            self._request_pass(recover=True)

    def _on_drift(self) -> None:
        if not self._active():
            return
        for qid in self.qpu_ids:
            drift_step(self.qpus[qid], self.cfg.drift_interval, self.drift_rng, self.cfg.drift)
        self._log(EventKind.DRIFT_STEP, {"dt": self.cfg.drift_interval})
        self._push(self.now + self.cfg.drift_interval, _DRIFT, {})

    def _on_expiry(self, job_id: str) -> None:
        entry = next((e for e in self.queue if e.job_id == job_id), None)
        if entry is None:
            return
        waited = self.now - entry.enqueue_time
        if entry.spec.constraints.max_queue_wait is None or waited <= entry.spec.constraints.max_queue_wait:
            return
        self.queue.remove(entry)
        self._cancel(entry, CANCEL_WAIT_EXCEEDED, waited)

    def _cancel(self, entry: QueueEntry, reason: str, waited: int) -> None:
        self.gateway.release(entry.spec.tenant_id)
        self.cancelled += 1
        row = self.job_rows[entry.job_id]
        row["status"] = "cancelled"
        row["cancel_reason"] = reason
        self._log(
            EventKind.JOB_CANCELLED,
            {"job_id": entry.job_id, "reason": reason, "waited_us": waited},
        )

    def _on_recal_end(self, qpu_id: str) -> None:
        qpu = self.qpus[qpu_id]
        finish_recalibration(qpu)
        self.health[qpu_id].reset()
        self.recal_until.pop(qpu_id, None)
        snap = poll(qpu, self.now)
        self.snapshots[qpu_id] = snap
        self._log(
            EventKind.RECAL_END,
            {"qpu_id": qpu_id, "state": snap.state.value, "mean_f2q": snap.mean_f2q},
        )
        self._request_pass(recover=True)

    def _start_recalibration(self, qpu_id: str, reason: str) -> None:
        qpu = self.qpus[qpu_id]
        begin_recalibration(qpu)
        until = self.now + self.cfg.d_recal
        self.recal_until[qpu_id] = until
        self.snapshots[qpu_id] = poll(qpu, self.now)
        log.info("t=%d recalibrating %s (%s) until %d", self.now, qpu_id, reason, until)
        self._log(EventKind.RECAL_START, {"qpu_id": qpu_id, "reason": reason, "until": until})
        self._push(until, _RECAL_END, {"qpu_id": qpu_id})

    def _on_complete(self, job_id: str, qpu_id: str) -> None:
        interval = self.busy_until.pop(qpu_id)
        record = self.records[job_id]
        spec_row = self.job_rows[job_id]
        busy_us = interval - spec_row["start_us"]
        self.qpu_busy_us[qpu_id] += busy_us
        self.completed += 1

        mitigated = self.mitigated.get(job_id)
        ideal = self._ideal_for(job_id)
        if mitigated is not None:
            achieved = parity_expectation(mitigated.mitigated_distribution)
        else:
            achieved = parity_expectation(record.empirical_distribution())
        parity_error = abs(achieved - parity_expectation(ideal))

        entry_info = self._entry_info.pop(job_id)
        cls = entry_info["class"]
        self.estimator.update((cls, qpu_id), float(busy_us))

        wait = spec_row["start_us"] - spec_row["submit_us"]
        metrics = JobMetrics(
            job_id=job_id,
            wait_time=wait,
            turnaround=self.now - spec_row["submit_us"],
            queue_time=spec_row["start_us"] - entry_info["enqueue"],
            exec_time=busy_us,
            predicted_vs_actual_duration_ratio=entry_info["estimated"] / busy_us if busy_us else 0.0,
            predicted_fidelity=entry_info["fidelity"],
            achieved_parity_error=parity_error,
        )
        self.metrics[job_id] = metrics
        spec_row.update(
            {
                "status": "completed",
                "complete_us": self.now,
                "wait_us": wait,
                "turnaround_us": metrics.turnaround,
                "exec_us": busy_us,
                "parity_error": parity_error,
                "zne_estimate": mitigated.zne_estimate if mitigated else None,
            }
        )
        self._log(
            EventKind.JOB_COMPLETE,
            {
                "job_id": job_id,
                "qpu_id": qpu_id,
                "wait_us": wait,
                "turnaround_us": metrics.turnaround,
                "parity_error": parity_error,
                "zne_estimate": mitigated.zne_estimate if mitigated else None,
            },
        )

        health = self.health[qpu_id]
        health.observe(parity_error)
        if flag_qpu(health, self.cfg.health_threshold):
            self._log(
                EventKind.QPU_FLAGGED,
                {
                    "qpu_id": qpu_id,
                    "rolling_parity_error": health.rolling_parity_error,
                    "threshold": self.cfg.health_threshold,
                },
            )
            if self.qpus[qpu_id].state is QpuState.ONLINE and qpu_id not in self.busy_until:
                self._start_recalibration(qpu_id, "flagged")
        self._request_pass()

    def _ideal_for(self, job_id: str) -> OutcomeDistribution:
        record = self.records[job_id]
        spec = self._specs[job_id]
        return spec.declared_ideal or OutcomeDistribution.point_mass_zeros(record.num_bits)

    # -- scheduling --------------------------------------------------------

    def _views(self) -> list[QpuView]:
        return [
            QpuView(
                qpu_id=qid,
                descriptor=self.qpus[qid],
                snapshot=self.snapshots[qid],
                busy=qid in self.busy_until,
            )
            for qid in self.qpu_ids
        ]

    def _select(self, views: list[QpuView]):
        if self.policy == "sjf":
            return select_sjf(self.queue, views, self.now, self.cfg.trial_placement)
        if self.policy == "bff":
            return select_bff(self.queue, views, self.now)
        if self.policy == "rr":
            return select_round_robin(self.queue, views, self.now, self.rr_cursor)
        if self.policy == "prio":
            return select_priority_aging(
                self.queue, views, self.now, self.cfg.aging_quantum, self.cfg.trial_placement
            )
        raise QFleetError(f"unknown policy {self.policy!r}")  # pragma: no cover

    def _schedule_pass(self, recover: bool = False) -> None:
        if self.gateway.total_pending != len(self.queue):
            raise QFleetError(
                f"pending/queue mismatch: {self.gateway.total_pending} != {len(self.queue)}"
            )
        for entry in expire_stale(self.queue, self.now):
            self._cancel(entry, CANCEL_WAIT_EXCEEDED, self.now - entry.enqueue_time)
        for entry in [e for e in self.queue if self._statically_infeasible(e)]:
            self.queue.remove(entry)
            self._cancel(entry, CANCEL_INFEASIBLE, self.now - entry.enqueue_time)

        while self.queue:
            picked = self._select(self._views())
            if picked is None:
                break
            decision, tr = picked
            self._commit(decision, tr)
        if recover:
            self._idle_recovery()

    def _statically_infeasible(self, entry: QueueEntry) -> bool:
        return (
            entry.required_qubits > self.max_fleet_qubits
            or entry.spec.constraints.min_two_qubit_fidelity > self.max_fleet_mean_f2q
        )

    def _commit(self, decision, tr) -> None:
        entry = next(e for e in self.queue if e.job_id == decision.job_id)
        qpu = self.qpus[decision.qpu_id]
        if qpu.state is not QpuState.ONLINE:
            raise QpuNotOnline(f"decision targets {decision.qpu_id} in state {qpu.state.value}")
        if decision.qpu_id in self.busy_until:
            raise QpuBusy(f"decision targets busy QPU {decision.qpu_id}")
        self.queue.remove(entry)
        self.gateway.release(entry.spec.tenant_id)

        spec = entry.spec
        snapshot = self.snapshots[decision.qpu_id]
        zne = self.zne if (self.cfg.mitigation and spec.mitigate) else None
        record, mitigated, execs = run_job(
            decision,
            tr,
            spec,
            live_cal=qpu.calibration,
            collector_cal=snapshot.calibration,
            zne=zne,
            rng_for=lambda k: substream(self.seed, "exec", spec.job_id, k),
            mitigation_enabled=self.cfg.mitigation,
        )
        busy_us = execs * duration_us(tr)
        end = self.now + busy_us
        self.busy_until[decision.qpu_id] = end
        self.records[spec.job_id] = record
        if mitigated is not None:
            self.mitigated[spec.job_id] = mitigated
        self._specs[spec.job_id] = spec
        self._entry_info[spec.job_id] = {
            "class": circuit_class(entry.profile),
            "enqueue": entry.enqueue_time,
            "estimated": entry.estimated_duration,
            "fidelity": decision.predicted_fidelity,
        }
        self.fidelities.append(decision.predicted_fidelity)
        row = self.job_rows[spec.job_id]
        row.update(
            {
                "status": "running",
                "qpu_id": decision.qpu_id,
                "policy": decision.policy_name,
                "start_us": self.now,
                "predicted_duration_us": tr.predicted_duration,
                "predicted_fidelity": decision.predicted_fidelity,
                "swap_overhead": decision.swap_overhead,
                "exec_count": execs,
            }
        )
        self._log(
            EventKind.JOB_START,
            {
                "job_id": spec.job_id,
                "qpu_id": decision.qpu_id,
                "policy": decision.policy_name,
                "predicted_duration_us": tr.predicted_duration,
                "busy_us": busy_us,
                "predicted_fidelity": decision.predicted_fidelity,
                "swap_overhead": decision.swap_overhead,
                "exec_count": execs,
                "snapshot_time": snapshot.time,
                "snapshot_age_us": self.now - snapshot.time,
            },
        )
        log.debug(
            "t=%d start %s on %s fid=%.4f swaps=%d busy=%dus (snapshot age %dus)",
            self.now,
            spec.job_id,
            decision.qpu_id,
            decision.predicted_fidelity,
            decision.swap_overhead,
            busy_us,
            self.now - snapshot.time,
        )
        self._push(end, _COMPLETE, {"job_id": spec.job_id, "qpu_id": decision.qpu_id})

    def _idle_recovery(self) -> None:
        """Break calibration-drift deadlock: nothing can run, nothing is coming.

        If queued jobs are feasible against baselines but every present
        snapshot rejects them, recalibrating the best candidate QPU restores
        baseline calibration and unblocks them.
        """
        if not self.queue or self.busy_until or self.recal_until or self.arrivals_remaining:
            return
        entry = min(self.queue, key=lambda e: (e.enqueue_time, e.job_id))
        candidates = [
            qid
            for qid in self.qpu_ids
            if self.qpus[qid].num_qubits >= entry.required_qubits
            and self.qpus[qid].baseline.mean_f2q >= entry.spec.constraints.min_two_qubit_fidelity
            and self.qpus[qid].state is QpuState.ONLINE
        ]
        if candidates:
            self._start_recalibration(candidates[0], "stale-calibration")


def _mean(values) -> float:
    items = list(values)
    return sum(items) / len(items)


def run(scenario: Scenario) -> RunLog:
    """Execute a scenario end to end; identical (scenario, seed) replays identically."""
    return Simulation(scenario).run()
