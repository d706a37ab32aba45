"""Job intake: validation of quantum job metadata and per-tenant quota admission."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .circuit import ParseError, SemanticError
from .circuit.parser import parse_qasm_cached
from .errors import QFleetError

if TYPE_CHECKING:
    from .circuit import CircuitIR
    from .executor import OutcomeDistribution

MALFORMED_CIRCUIT = "MalformedCircuit"
INVALID_CONSTRAINT = "InvalidConstraint"
QUOTA_EXCEEDED = "QuotaExceeded"
DUPLICATE_JOB_ID = "DuplicateJobId"

MAX_PRIORITY = 9


class GatewayError(QFleetError):
    pass


@dataclass(frozen=True)
class JobConstraints:
    """User-declared requirements attached to a job submission.

    ``max_queue_wait`` is in microseconds; ``None`` means unbounded.
    """

    min_two_qubit_fidelity: float
    required_qubits: int
    max_queue_wait: int | None
    priority: int


@dataclass(frozen=True)
class JobSpec:
    """A submitted quantum job: QASM text plus scheduling metadata."""

    job_id: str
    tenant_id: str
    qasm_source: str
    shots: int
    constraints: JobConstraints
    declared_ideal: "OutcomeDistribution | None" = None
    submit_time: int = 0
    mitigate: bool = True


@dataclass
class TenantQuota:
    tenant_id: str
    max_pending: int = 100
    pending_count: int = 0


@dataclass(frozen=True)
class Violation:
    kind: str  # MALFORMED_CIRCUIT or INVALID_CONSTRAINT
    field: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    job_id: str
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class AdmissionResult:
    job_id: str
    admitted: bool
    reason: str | None = None
    enqueue_time: int = 0


def validate_job(spec: JobSpec) -> tuple[ValidationReport, "CircuitIR | None"]:
    """Check a submission for admissibility; a job with zero violations may enter the queue.

    Returns the report together with the parsed circuit (``None`` on parse
    failure) so callers do not parse twice.
    """
    violations: list[Violation] = []
    ir = None
    if not spec.qasm_source.strip():
        violations.append(Violation(MALFORMED_CIRCUIT, "qasm_source", "empty circuit source"))
    else:
        try:
            ir = parse_qasm_cached(spec.qasm_source)
        except (ParseError, SemanticError) as exc:
            violations.append(Violation(MALFORMED_CIRCUIT, "qasm_source", str(exc)))

    if spec.shots < 1:
        violations.append(Violation(INVALID_CONSTRAINT, "shots", f"shots must be >= 1, got {spec.shots}"))
    c = spec.constraints
    if not 0.0 < c.min_two_qubit_fidelity <= 1.0:
        violations.append(
            Violation(
                INVALID_CONSTRAINT,
                "min_two_qubit_fidelity",
                f"must lie in (0, 1], got {c.min_two_qubit_fidelity}",
            )
        )
    if c.required_qubits < 1:
        violations.append(
            Violation(INVALID_CONSTRAINT, "required_qubits", f"must be >= 1, got {c.required_qubits}")
        )
    if c.max_queue_wait is not None and c.max_queue_wait < 0:
        violations.append(
            Violation(INVALID_CONSTRAINT, "max_queue_wait", f"must be >= 0 or unbounded, got {c.max_queue_wait}")
        )
    if not 0 <= c.priority <= MAX_PRIORITY:
        violations.append(
            Violation(INVALID_CONSTRAINT, "priority", f"must lie in 0..{MAX_PRIORITY}, got {c.priority}")
        )
    if spec.declared_ideal is not None:
        try:
            spec.declared_ideal.validate()
        except QFleetError as exc:
            violations.append(Violation(INVALID_CONSTRAINT, "declared_ideal", str(exc)))
    if ir is not None:
        from .executor import MAX_MEASURED_BITS  # deferred: executor imports this module

        if ir.num_cbits > MAX_MEASURED_BITS:
            violations.append(
                Violation(
                    MALFORMED_CIRCUIT,
                    "qasm_source",
                    f"{ir.num_cbits} measured bits exceed the supported cap {MAX_MEASURED_BITS}",
                )
            )
        if spec.declared_ideal is not None and spec.declared_ideal.num_bits != ir.num_cbits:
            violations.append(
                Violation(
                    INVALID_CONSTRAINT,
                    "declared_ideal",
                    f"declared over {spec.declared_ideal.num_bits} bits, circuit measures {ir.num_cbits}",
                )
            )
    return ValidationReport(spec.job_id, tuple(violations)), ir


class Gateway:
    """Admission front door: tracks per-tenant quotas and job-id uniqueness."""

    def __init__(self, default_max_pending: int = 100, quotas: dict[str, int] | None = None):
        self._default_max_pending = default_max_pending
        self._quotas: dict[str, TenantQuota] = {}
        for tenant, cap in (quotas or {}).items():
            self._quotas[tenant] = TenantQuota(tenant, max_pending=cap)
        self._seen_ids: set[str] = set()

    def quota_for(self, tenant_id: str) -> TenantQuota:
        if tenant_id not in self._quotas:
            self._quotas[tenant_id] = TenantQuota(tenant_id, max_pending=self._default_max_pending)
        return self._quotas[tenant_id]

    def admit(self, spec: JobSpec) -> AdmissionResult:
        """Admit a validated job, enforcing job-id uniqueness and the tenant quota.

        On success the tenant's pending count is incremented and the job is
        considered enqueued at ``spec.submit_time``; on failure nothing changes.
        """
        if spec.job_id in self._seen_ids:
            return AdmissionResult(spec.job_id, False, DUPLICATE_JOB_ID)
        quota = self.quota_for(spec.tenant_id)
        if quota.pending_count >= quota.max_pending:
            return AdmissionResult(spec.job_id, False, QUOTA_EXCEEDED)
        self._seen_ids.add(spec.job_id)
        quota.pending_count += 1
        return AdmissionResult(spec.job_id, True, None, enqueue_time=spec.submit_time)

    def release(self, tenant_id: str) -> None:
        """A queued job left the queue (started or cancelled)."""
        quota = self.quota_for(tenant_id)
        if quota.pending_count <= 0:
            raise GatewayError(f"tenant {tenant_id!r}: pending count underflow")
        quota.pending_count -= 1

    @property
    def total_pending(self) -> int:
        return sum(q.pending_count for q in self._quotas.values())
