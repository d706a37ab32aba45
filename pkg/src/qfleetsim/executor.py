"""Shot execution model and the results collector's error mitigation.

Execution follows a declared-distribution model: each shot draws from the
job's ideal outcome distribution with probability F(lambda) = max(0, 1 -
lambda * (1 - predicted_fidelity)) and from the uniform distribution
otherwise, then every bit is flipped through its qubit's readout confusion.
The collector inverts the per-qubit confusion matrices and extrapolates
parity expectations measured at amplified noise factors back to zero noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as dc_replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import QFleetError
from .fleet import CalibrationData
from .gateway import JobSpec
from .scheduler import ScheduleDecision
from .transpiler import TranspileResult

MAX_MEASURED_BITS = 16

READOUT_TAG = "readout-inversion"
ZNE_TAG = "zne-richardson"


class QpuBusy(QFleetError):
    pass


class QpuNotOnline(QFleetError):
    pass


class SingularConfusion(QFleetError):
    pass


class DegenerateLambdas(QFleetError):
    pass


class TooManyMeasuredBits(QFleetError):
    pass


class DistributionError(QFleetError):
    pass


@dataclass(frozen=True)
class OutcomeDistribution:
    """Probability distribution over fixed-width measurement bitstrings."""

    num_bits: int
    probabilities: Mapping[str, float]

    def validate(self) -> None:
        total = 0.0
        for key, p in self.probabilities.items():
            if len(key) != self.num_bits or set(key) - {"0", "1"}:
                raise DistributionError(f"bad outcome key {key!r} for {self.num_bits} bits")
            if p < 0.0:
                raise DistributionError(f"negative probability {p} for {key!r}")
            total += p
        if abs(total - 1.0) > 1e-9:
            raise DistributionError(f"probabilities sum to {total}, expected 1")

    @staticmethod
    def point_mass_zeros(num_bits: int) -> "OutcomeDistribution":
        return OutcomeDistribution(num_bits, {"0" * num_bits: 1.0})

    @staticmethod
    def ghz(num_bits: int) -> "OutcomeDistribution":
        if num_bits < 1:
            raise DistributionError("GHZ needs at least one bit")
        return OutcomeDistribution(num_bits, {"0" * num_bits: 0.5, "1" * num_bits: 0.5})

    def to_vector(self) -> np.ndarray:
        """Dense vector indexed by int(bitstring, 2); bit 0 is the most significant."""
        if self.num_bits > MAX_MEASURED_BITS:
            raise TooManyMeasuredBits(f"{self.num_bits} bits > cap {MAX_MEASURED_BITS}")
        vec = np.zeros(2**self.num_bits)
        for key, p in self.probabilities.items():
            vec[int(key, 2) if key else 0] += p
        return vec

    @staticmethod
    def from_vector(vec: np.ndarray, num_bits: int) -> "OutcomeDistribution":
        probs = {
            format(i, f"0{num_bits}b") if num_bits else "": float(p)
            for i, p in enumerate(vec)
            if p > 0.0
        }
        if not probs:  # all mass clipped away; keep a valid distribution
            probs = {"0" * num_bits: 1.0}
        return OutcomeDistribution(num_bits, probs)


@dataclass(frozen=True)
class ExecutionRecord:
    """Raw result of one shot batch on one QPU."""

    job_id: str
    qpu_id: str
    shots: int
    raw_counts: dict[str, int]
    start_time: int
    end_time: int
    noise_factor: float
    applied_fidelity: float
    measured_qubits: tuple[int, ...]  # classical bit index -> physical qubit (-1 if unmeasured)

    def __post_init__(self) -> None:
        if sum(self.raw_counts.values()) != self.shots:
            raise QFleetError("raw counts do not sum to shots")

    @property
    def num_bits(self) -> int:
        return len(self.measured_qubits)

    def empirical_distribution(self) -> OutcomeDistribution:
        return OutcomeDistribution(
            self.num_bits, {k: v / self.shots for k, v in self.raw_counts.items()}
        )


@dataclass(frozen=True)
class MitigatedResult:
    job_id: str
    mitigated_distribution: OutcomeDistribution
    zne_estimate: float | None = None
    method_tags: frozenset[str] = frozenset()


@dataclass(frozen=True)
class ZneConfig:
    """Noise amplification factors and extrapolation coefficients (sum to 1)."""

    lambdas: tuple[float, ...]
    coefficients: tuple[float, ...]

    def validate(self) -> None:
        if len(self.lambdas) != len(self.coefficients):
            raise DegenerateLambdas("lambdas and coefficients differ in length")
        if len(self.lambdas) < 2:
            raise DegenerateLambdas("need at least two noise factors")
        if self.lambdas[0] != 1.0:
            raise DegenerateLambdas("first noise factor must be 1")
        if any(b <= a for a, b in zip(self.lambdas, self.lambdas[1:])):
            raise DegenerateLambdas("noise factors must be strictly ascending")
        if abs(sum(self.coefficients) - 1.0) > 1e-9:
            raise DegenerateLambdas("coefficients must sum to 1")
        weighted = sum(c * lam for c, lam in zip(self.coefficients, self.lambdas))
        if abs(weighted) > 1e-6:
            raise DegenerateLambdas("coefficients must cancel the linear noise term")

    @staticmethod
    def richardson(lambdas: Sequence[float]) -> "ZneConfig":
        cfg = ZneConfig(tuple(lambdas), zne_coefficients(lambdas, len(lambdas) - 1))
        cfg.validate()
        return cfg


def amplified_fidelity(predicted_fidelity: float, lam: float) -> float:
    """Survival probability at noise factor lam: error rate scales linearly."""
    return max(0.0, 1.0 - lam * (1.0 - predicted_fidelity))


def confusion_matrix(eps0: float, eps1: float) -> np.ndarray:
    return np.array([[1.0 - eps0, eps1], [eps0, 1.0 - eps1]])


def _apply_channel(vec: np.ndarray, matrices: list[np.ndarray], num_bits: int) -> np.ndarray:
    if num_bits == 0:
        return vec
    tensor = vec.reshape((2,) * num_bits)
    for axis, mat in enumerate(matrices):
        tensor = np.moveaxis(np.tensordot(mat, tensor, axes=([1], [axis])), 0, axis)
    return tensor.reshape(-1)


def _readout_pairs(
    measured_qubits: tuple[int, ...], cal: CalibrationData
) -> list[tuple[float, float]]:
    return [
        (cal.readout_eps0[q], cal.readout_eps1[q]) if q >= 0 else (0.0, 0.0)
        for q in measured_qubits
    ]


def measured_qubit_map(tr: TranspileResult) -> tuple[int, ...]:
    """Classical bit -> physical qubit it is read from (-1 when never written)."""
    mapping = tr.physical.measured_cbit_qubits
    return tuple(mapping.get(c, -1) for c in range(tr.physical.num_cbits))


def execute(
    decision: ScheduleDecision,
    tr: TranspileResult,
    spec: JobSpec,
    cal: CalibrationData,
    lam: float,
    rng: np.random.Generator,
) -> ExecutionRecord:
    """Sample shot counts for one execution at noise factor lam.

    Shots are drawn from the exact post-noise outcome distribution (declared
    ideal mixed toward uniform at strength 1 - F(lam), then pushed through the
    readout confusion of each measured qubit), so results are deterministic
    for a given generator.
    """
    if lam < 1.0:
        raise DegenerateLambdas(f"noise factor must be >= 1, got {lam}")
    num_bits = tr.physical.num_cbits
    if num_bits > MAX_MEASURED_BITS:
        raise TooManyMeasuredBits(f"{num_bits} measured bits > cap {MAX_MEASURED_BITS}")
    ideal = spec.declared_ideal or OutcomeDistribution.point_mass_zeros(num_bits)
    if ideal.num_bits != num_bits:
        raise DistributionError(
            f"declared ideal has {ideal.num_bits} bits, circuit measures {num_bits}"
        )
    fidelity = amplified_fidelity(tr.predicted_fidelity, lam)
    vec = ideal.to_vector()
    dim = max(1, 2**num_bits)
    mixed = fidelity * vec + (1.0 - fidelity) / dim
    measured = measured_qubit_map(tr)
    matrices = [confusion_matrix(e0, e1) for e0, e1 in _readout_pairs(measured, cal)]
    noisy = _apply_channel(mixed, matrices, num_bits)
    noisy = np.clip(noisy, 0.0, None)
    noisy /= noisy.sum()
    counts = rng.multinomial(spec.shots, noisy)
    raw = {
        (format(i, f"0{num_bits}b") if num_bits else ""): int(c)
        for i, c in enumerate(counts)
        if c > 0
    }
    duration = duration_us(tr)
    return ExecutionRecord(
        job_id=spec.job_id,
        qpu_id=decision.qpu_id,
        shots=spec.shots,
        raw_counts=raw,
        start_time=decision.start_time,
        end_time=decision.start_time + duration,
        noise_factor=lam,
        applied_fidelity=fidelity,
        measured_qubits=measured,
    )


def duration_us(tr: TranspileResult) -> int:
    """Busy time of one execution on the integer-microsecond simulation clock."""
    return max(1, math.ceil(tr.predicted_duration))


def mitigate_readout(record: ExecutionRecord, cal: CalibrationData) -> MitigatedResult:
    """Invert each measured qubit's confusion matrix over the empirical distribution.

    Negative quasi-probabilities are clipped to zero and the result is
    renormalized.
    """
    vec = record.empirical_distribution().to_vector()
    inverses = []
    for e0, e1 in _readout_pairs(record.measured_qubits, cal):
        det = 1.0 - e0 - e1
        if det <= 1e-12:
            raise SingularConfusion(f"confusion matrix singular (eps0={e0}, eps1={e1})")
        inverses.append(np.array([[1.0 - e1, -e1], [-e0, 1.0 - e0]]) / det)
    mitigated = _apply_channel(vec, inverses, record.num_bits)
    mitigated = np.clip(mitigated, 0.0, None)
    mitigated /= mitigated.sum()
    return MitigatedResult(
        job_id=record.job_id,
        mitigated_distribution=OutcomeDistribution.from_vector(mitigated, record.num_bits),
        method_tags=frozenset({READOUT_TAG}),
    )


def zne_coefficients(lambdas: Sequence[float], order: int) -> tuple[float, ...]:
    """Richardson coefficients: solve sum_i c_i * lambda_i^k = delta(k, 0)."""
    if len(lambdas) < 2:
        raise DegenerateLambdas("need at least two noise factors")
    if order != len(lambdas) - 1:
        raise DegenerateLambdas(f"order must be {len(lambdas) - 1} for {len(lambdas)} factors")
    if len(set(lambdas)) != len(lambdas):
        raise DegenerateLambdas(f"repeated noise factors in {tuple(lambdas)}")
    vander = np.array([[lam**k for lam in lambdas] for k in range(order + 1)])
    rhs = np.zeros(order + 1)
    rhs[0] = 1.0
    return tuple(float(c) for c in np.linalg.solve(vander, rhs))


def zne_extrapolate(
    estimates: Sequence[tuple[float, float]], coefficients: Sequence[float]
) -> float:
    """Zero-noise estimate: coefficient-weighted sum of expectations at each factor."""
    if len(estimates) != len(coefficients):
        raise DegenerateLambdas("estimates and coefficients differ in length")
    return float(sum(c * e for c, (_, e) in zip(coefficients, estimates)))


def parity_expectation(dist: OutcomeDistribution) -> float:
    """Z-parity expectation: sum over outcomes of p(b) * (-1)^popcount(b)."""
    total = 0.0
    for key, p in dist.probabilities.items():
        total += p * (-1.0 if key.count("1") % 2 else 1.0)
    return total


def run_job(
    decision: ScheduleDecision,
    tr: TranspileResult,
    spec: JobSpec,
    live_cal: CalibrationData,
    collector_cal: CalibrationData,
    zne: ZneConfig | None,
    rng_for: Callable[[int], np.random.Generator],
    *,
    mitigation_enabled: bool = True,
) -> tuple[ExecutionRecord, MitigatedResult | None, int]:
    """Dispatch one job: execute (at every noise factor when ZNE applies), then mitigate.

    Sampling uses the QPU's live calibration; the collector corrects with the
    published snapshot calibration, which matches exactly when drift is off.
    Returns the primary (lambda = 1) record, the mitigated result, and how many
    executions were charged to the QPU.
    """
    mitigate = mitigation_enabled and spec.mitigate
    use_zne = mitigate and zne is not None and len(zne.lambdas) >= 2
    lambdas = zne.lambdas if use_zne else (1.0,)
    records = [execute(decision, tr, spec, live_cal, lam, rng_for(k)) for k, lam in enumerate(lambdas)]
    primary = records[0]
    if not mitigate:
        return primary, None, len(records)
    mitigated_each = [mitigate_readout(rec, collector_cal) for rec in records]
    result = mitigated_each[0]
    if use_zne:
        pairs = [
            (lam, parity_expectation(m.mitigated_distribution))
            for lam, m in zip(lambdas, mitigated_each)
        ]
        estimate = zne_extrapolate(pairs, zne.coefficients)
        result = dc_replace(
            result,
            zne_estimate=estimate,
            method_tags=result.method_tags | {ZNE_TAG},
        )
    return primary, result, len(records)
