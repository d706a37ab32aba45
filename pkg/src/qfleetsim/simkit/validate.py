"""Independent event-log validator.

Replays a run's event stream with no access to engine internals and re-derives
queue membership, QPU availability, and busy intervals, reporting every
constraint violation it finds. Feasibility is checked against the same
published snapshots (MonitorPoll / RecalStart / RecalEnd) the scheduler saw.
"""

from __future__ import annotations


def validate_events(events: list[dict]) -> list[str]:
    """Return all violations found in an event-dict stream (empty means clean)."""
    violations: list[str] = []
    last_time = -1
    last_seq = -1

    qpu_state: dict[str, str] = {}
    qpu_qubits: dict[str, int] = {}
    qpu_fidelity: dict[str, float] = {}
    busy: dict[str, tuple[str, int]] = {}  # qpu -> (job, busy-until)
    intervals: dict[str, list[tuple[int, int, str]]] = {}

    queued: dict[str, dict] = {}  # job -> arrival payload
    started: dict[str, dict] = {}
    admitted = completed = cancelled = 0

    for ev in events:
        time, seq, kind, payload = ev["time"], ev["seq"], ev["kind"], ev["payload"]
        if time < last_time:
            violations.append(f"seq {seq}: time moved backwards ({time} < {last_time})")
        if seq <= last_seq:
            violations.append(f"seq {seq}: sequence not increasing (prev {last_seq})")
        last_time, last_seq = time, seq

        if kind == "MonitorPoll":
            for snap in payload["snapshots"]:
                qpu_state[snap["qpu_id"]] = snap["state"]
                qpu_qubits[snap["qpu_id"]] = snap["num_qubits"]
                qpu_fidelity[snap["qpu_id"]] = snap["mean_f2q"]

        elif kind == "RecalStart":
            qid = payload["qpu_id"]
            if qid in busy:
                violations.append(f"seq {seq}: recalibration started on busy QPU {qid}")
            if qpu_state.get(qid) == "recalibrating":
                violations.append(f"seq {seq}: QPU {qid} already recalibrating")
            qpu_state[qid] = "recalibrating"

        elif kind == "RecalEnd":
            qid = payload["qpu_id"]
            if qpu_state.get(qid) != "recalibrating":
                violations.append(f"seq {seq}: recalibration ended on {qid} without starting")
            qpu_state[qid] = payload["state"]
            qpu_fidelity[qid] = payload["mean_f2q"]

        elif kind == "JobArrival":
            job = payload["job_id"]
            if job in queued or job in started:
                violations.append(f"seq {seq}: duplicate arrival for {job}")
            if payload["admitted"]:
                admitted += 1
                queued[job] = {"enqueue": time, **payload}

        elif kind == "JobStart":
            job, qid = payload["job_id"], payload["qpu_id"]
            arrival = queued.pop(job, None)
            if arrival is None:
                violations.append(f"seq {seq}: start of {job} which is not queued")
                continue
            if qid in busy:
                violations.append(f"seq {seq}: {job} started on busy QPU {qid} (running {busy[qid][0]})")
            state = qpu_state.get(qid)
            if state != "online":
                violations.append(f"seq {seq}: {job} started on {qid} in state {state!r}")
            if qpu_qubits.get(qid, 0) < arrival["required_qubits"]:
                violations.append(
                    f"seq {seq}: {job} needs {arrival['required_qubits']} qubits, "
                    f"{qid} has {qpu_qubits.get(qid, 0)}"
                )
            if qpu_fidelity.get(qid, 0.0) < arrival["min_two_qubit_fidelity"]:
                violations.append(
                    f"seq {seq}: {job} requires fidelity {arrival['min_two_qubit_fidelity']}, "
                    f"{qid} offers {qpu_fidelity.get(qid, 0.0)}"
                )
            busy[qid] = (job, time + payload["busy_us"])
            started[job] = {"qpu": qid, "start": time, "busy_us": payload["busy_us"], **arrival}

        elif kind == "JobComplete":
            job, qid = payload["job_id"], payload["qpu_id"]
            info = started.pop(job, None)
            if info is None:
                violations.append(f"seq {seq}: completion of {job} which never started")
                continue
            expected_end = info["start"] + info["busy_us"]
            if time != expected_end:
                violations.append(
                    f"seq {seq}: {job} completed at {time}, expected {expected_end}"
                )
            if busy.get(qid, (None, None))[0] != job:
                violations.append(f"seq {seq}: completion of {job} on {qid} which is not running it")
            else:
                busy.pop(qid)
            intervals.setdefault(qid, []).append((info["start"], time, job))
            completed += 1

        elif kind == "JobCancelled":
            job = payload["job_id"]
            info = queued.pop(job, None)
            if info is None:
                violations.append(f"seq {seq}: cancellation of {job} which is not queued")
                continue
            cancelled += 1
            if payload["reason"] == "WaitExceeded":
                max_wait = info.get("max_queue_wait")
                waited = time - info["enqueue"]
                if max_wait is None:
                    violations.append(f"seq {seq}: {job} wait-cancelled despite unbounded wait")
                elif waited <= max_wait:
                    violations.append(
                        f"seq {seq}: {job} cancelled after {waited} <= max wait {max_wait}"
                    )

    for qid, (job, _) in busy.items():
        violations.append(f"end of log: {job} still running on {qid}")
    if queued:
        violations.append(f"end of log: {sorted(queued)} still queued")
    if admitted != completed + cancelled:
        violations.append(
            f"end of log: {admitted} admitted != {completed} completed + {cancelled} cancelled"
        )

    for qid, spans in intervals.items():
        spans.sort()
        for (s1, e1, j1), (s2, e2, j2) in zip(spans, spans[1:]):
            if s2 < e1:
                violations.append(f"overlap on {qid}: {j1} [{s1},{e1}) and {j2} [{s2},{e2})")
    return violations
