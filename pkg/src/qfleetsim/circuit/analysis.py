"""Static circuit analysis: layering, the timing/census profile, and job tags."""

from __future__ import annotations

from dataclasses import dataclass

from .ir import CircuitIR, GateIR, GateKind, ONE_QUBIT_GATES

DEEP_CIRCUIT_TAG = "deep-circuit"
HIGH_FIDELITY_TAG = "requires-high-fidelity"


@dataclass(frozen=True)
class GateDurations:
    """Gate wall times in microseconds."""

    t_1q: float
    t_2q: float
    t_ro: float

    def of(self, gate: GateIR) -> float:
        if gate.name is GateKind.BARRIER:
            return 0.0
        if gate.name is GateKind.MEASURE:
            return self.t_ro
        if gate.name is GateKind.SWAP:
            # a SWAP executes as three 2-qubit gates
            return 3.0 * self.t_2q
        if gate.name in ONE_QUBIT_GATES:
            return self.t_1q
        return self.t_2q


@dataclass(frozen=True)
class CircuitProfile:
    """Result of quantum-aware static analysis of one circuit."""

    depth: int
    num_qubits: int
    one_qubit_gate_count: int
    two_qubit_gate_count: int
    measure_count: int
    estimated_duration: float
    tags: frozenset[str] = frozenset()


@dataclass(frozen=True)
class FleetNominal:
    """Fleet-wide reference values the tagger compares a circuit against."""

    min_t2: float
    p90_mean_f2q: float
    kappa: float = 0.5


def build_layers(ir: CircuitIR) -> list[list[GateIR]]:
    """Greedy ASAP layering.

    Each gate lands in the earliest layer after every prior gate sharing one of
    its qubits; a barrier forces a boundary across all qubits and occupies no
    layer itself. Depth is ``len(build_layers(ir))``.
    """
    frontier = [0] * ir.num_qubits  # earliest admissible layer per qubit
    barrier_floor = 0
    layers: list[list[GateIR]] = []
    for g in ir.gates:
        if g.name is GateKind.BARRIER:
            barrier_floor = len(layers)
            continue
        lay = barrier_floor
        for q in g.qubits:
            if frontier[q] > lay:
                lay = frontier[q]
        if lay == len(layers):
            layers.append([])
        layers[lay].append(g)
        for q in g.qubits:
            frontier[q] = lay + 1
    return layers


def layered_duration(layers: list[list[GateIR]], durations: GateDurations) -> float:
    """Critical-path duration under the layer model: sum of per-layer maxima."""
    return sum(max(durations.of(g) for g in layer) for layer in layers)


def profile(ir: CircuitIR, durations: GateDurations) -> CircuitProfile:
    """Compute the static profile (depth, gate census, estimated duration)."""
    layers = build_layers(ir)
    one_q = two_q = meas = 0
    for g in ir.gates:
        if g.name is GateKind.BARRIER:
            continue
        if g.name is GateKind.MEASURE:
            meas += 1
        elif g.is_two_qubit:
            two_q += 1
        else:
            one_q += 1
    return CircuitProfile(
        depth=len(layers),
        num_qubits=ir.num_qubits,
        one_qubit_gate_count=one_q,
        two_qubit_gate_count=two_q,
        measure_count=meas,
        estimated_duration=layered_duration(layers, durations),
    )


def tag(profile_: CircuitProfile, min_two_qubit_fidelity: float, nominal: FleetNominal) -> frozenset[str]:
    """Assign scheduler hint tags from the profile and the job's fidelity floor.

    ``deep-circuit`` marks estimated durations beyond ``kappa * min_t2`` (too
    deep to finish within fleet coherence); ``requires-high-fidelity`` marks
    jobs whose required 2-qubit fidelity reaches the fleet's 90th-percentile
    mean.
    """
    tags = set()
    if profile_.estimated_duration > nominal.kappa * nominal.min_t2:
        tags.add(DEEP_CIRCUIT_TAG)
    if min_two_qubit_fidelity >= nominal.p90_mean_f2q:
        tags.add(HIGH_FIDELITY_TAG)
    return frozenset(tags)
