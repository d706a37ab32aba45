"""Event records: the replayable total order every run produces."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class EventKind(str, Enum):
    JOB_ARRIVAL = "JobArrival"
    JOB_START = "JobStart"
    JOB_COMPLETE = "JobComplete"
    MONITOR_POLL = "MonitorPoll"
    DRIFT_STEP = "DriftStep"
    RECAL_START = "RecalStart"
    RECAL_END = "RecalEnd"
    JOB_CANCELLED = "JobCancelled"
    QPU_FLAGGED = "QpuFlagged"


@dataclass(frozen=True)
class Event:
    """One simulation event; the log is totally ordered by (time, seq)."""

    time: int
    seq: int
    kind: EventKind
    payload: dict

    def as_dict(self) -> dict:
        return {"time": self.time, "seq": self.seq, "kind": self.kind.value, "payload": self.payload}
