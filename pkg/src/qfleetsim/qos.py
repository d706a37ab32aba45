"""QoS feedback loop: per-job metrics, execution-time estimator, QPU health flags."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .circuit import CircuitProfile
from .errors import QFleetError
from .fleet import nearest_rank_percentile

DEFAULT_BETA = 0.2
DEFAULT_HEALTH_WINDOW = 20
DEFAULT_HEALTH_MIN_OBS = 10
DEFAULT_HEALTH_THRESHOLD = 0.15


class NonPositiveDuration(QFleetError):
    pass


def pow2_bucket(value: int) -> int:
    """Largest power of two <= value (0 for 0); bounds the estimator's key space."""
    return 0 if value <= 0 else 1 << (value.bit_length() - 1)


def circuit_class(profile: CircuitProfile) -> tuple[int, int]:
    """Estimator key: (depth bucket, 2-qubit gate count bucket), powers of two."""
    return (pow2_bucket(profile.depth), pow2_bucket(profile.two_qubit_gate_count))


@dataclass
class EstimatorState:
    """Exponential moving average of observed durations per (circuit class, QPU)."""

    beta: float = DEFAULT_BETA
    ema: dict[tuple[tuple[int, int], str], float] = field(default_factory=dict)
    observation_count: dict[tuple[tuple[int, int], str], int] = field(default_factory=dict)

    def update(self, key: tuple[tuple[int, int], str], observed_duration: float) -> float:
        """Fold one observed duration into the estimate; first observation seeds it."""
        if observed_duration <= 0:
            raise NonPositiveDuration(f"observed duration {observed_duration}")
        if key not in self.ema:
            self.ema[key] = float(observed_duration)
        else:
            self.ema[key] = self.beta * observed_duration + (1.0 - self.beta) * self.ema[key]
        self.observation_count[key] = self.observation_count.get(key, 0) + 1
        return self.ema[key]

    def predict_class(self, cls: tuple[int, int]) -> float | None:
        """Mean of per-QPU estimates for a class; None before any observation."""
        values = [v for (c, _), v in sorted(self.ema.items()) if c == cls]
        if not values:
            return None
        return sum(values) / len(values)


def update_estimator(
    state: EstimatorState, observed_duration: float, key: tuple[tuple[int, int], str]
) -> float:
    return state.update(key, observed_duration)


@dataclass
class QpuHealth:
    """Rolling parity-error window; a flag requests recalibration."""

    qpu_id: str
    window: int = DEFAULT_HEALTH_WINDOW
    min_observations: int = DEFAULT_HEALTH_MIN_OBS
    errors: deque = field(default_factory=deque)
    flagged: bool = False

    def observe(self, parity_error: float) -> None:
        self.errors.append(parity_error)
        while len(self.errors) > self.window:
            self.errors.popleft()

    @property
    def rolling_parity_error(self) -> float:
        return sum(self.errors) / len(self.errors) if self.errors else 0.0

    def reset(self) -> None:
        """Fresh window after recalibration completes."""
        self.errors.clear()
        self.flagged = False


def flag_qpu(health: QpuHealth, threshold: float = DEFAULT_HEALTH_THRESHOLD) -> bool:
    """Flag the QPU when enough observations show excessive rolling parity error.

    Returns True only on the transition into the flagged state; the caller is
    expected to emit a recalibration request for it.
    """
    if health.flagged or len(health.errors) < health.min_observations:
        return False
    if health.rolling_parity_error > threshold:
        health.flagged = True
        return True
    return False


@dataclass(frozen=True)
class JobMetrics:
    job_id: str
    wait_time: int
    turnaround: int
    queue_time: int
    exec_time: int
    predicted_vs_actual_duration_ratio: float
    predicted_fidelity: float
    achieved_parity_error: float | None


@dataclass(frozen=True)
class SummaryReport:
    policy: str
    total_jobs: int
    completed: int
    cancelled: int
    mean_wait_us: float
    p95_wait_us: float
    mean_turnaround_us: float
    throughput_jobs_per_s: float
    mean_predicted_fidelity: float
    qpu_utilization: dict[str, float]
    qpu_busy_us: dict[str, int]
    horizon_us: int

    def as_dict(self) -> dict:
        return {
            "policy": self.policy,
            "total_jobs": self.total_jobs,
            "completed": self.completed,
            "cancelled": self.cancelled,
            "mean_wait_us": self.mean_wait_us,
            "p95_wait_us": self.p95_wait_us,
            "mean_turnaround_us": self.mean_turnaround_us,
            "throughput_jobs_per_s": self.throughput_jobs_per_s,
            "mean_predicted_fidelity": self.mean_predicted_fidelity,
            "qpu_utilization": {k: self.qpu_utilization[k] for k in sorted(self.qpu_utilization)},
            "qpu_busy_us": {k: self.qpu_busy_us[k] for k in sorted(self.qpu_busy_us)},
            "horizon_us": self.horizon_us,
        }


def summarize(
    policy: str,
    metrics: list[JobMetrics],
    cancelled: int,
    qpu_busy_us: dict[str, int],
    horizon_us: int,
    predicted_fidelities: list[float],
) -> SummaryReport:
    """Aggregate per-policy run statistics; safe on empty runs."""
    waits = [m.wait_time for m in metrics]
    completed = len(metrics)
    horizon_s = horizon_us / 1e6
    return SummaryReport(
        policy=policy,
        total_jobs=completed + cancelled,
        completed=completed,
        cancelled=cancelled,
        mean_wait_us=sum(waits) / completed if completed else 0.0,
        p95_wait_us=nearest_rank_percentile([float(w) for w in waits], 0.95) if waits else 0.0,
        mean_turnaround_us=sum(m.turnaround for m in metrics) / completed if completed else 0.0,
        throughput_jobs_per_s=completed / horizon_s if horizon_us > 0 else 0.0,
        mean_predicted_fidelity=(
            sum(predicted_fidelities) / len(predicted_fidelities) if predicted_fidelities else 0.0
        ),
        qpu_utilization={
            qpu: (busy / horizon_us if horizon_us > 0 else 0.0)
            for qpu, busy in qpu_busy_us.items()
        },
        qpu_busy_us=dict(qpu_busy_us),
        horizon_us=horizon_us,
    )
