"""Logical-to-physical circuit mapping: layout, SWAP routing, and cost estimation."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .circuit import CircuitIR, GateDurations, GateIR, GateKind, build_layers, layered_duration
from .errors import QFleetError
from .fleet import CalibrationData, CalibrationSnapshot, QpuDescriptor, normalize_edge


class TooManyQubits(QFleetError):
    pass


class DisconnectedTarget(QFleetError):
    pass


@dataclass(frozen=True)
class Layout:
    """Injective map logical qubit index -> physical qubit index."""

    mapping: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(set(self.mapping)) != len(self.mapping):
            raise QFleetError(f"layout not injective: {self.mapping}")

    def physical(self, logical: int) -> int:
        return self.mapping[logical]


@dataclass(frozen=True)
class TranspileResult:
    """A routed physical circuit with its predicted cost on one QPU."""

    qpu_id: str
    physical: CircuitIR
    final_layout: Layout
    swap_count: int
    physical_depth: int
    predicted_fidelity: float
    predicted_duration: float


def interaction_counts(ir: CircuitIR) -> list[int]:
    counts = [0] * ir.num_qubits
    for g in ir.gates:
        if g.is_two_qubit:
            for q in g.qubits:
                counts[q] += 1
    return counts


def initial_layout(ir: CircuitIR, qpu: QpuDescriptor) -> Layout:
    """Greedy degree matching: busiest logical qubits onto best-connected physical ones.

    Logical qubits are ordered by descending 2-qubit interaction count, physical
    qubits by descending coupling degree; ties break by ascending index.
    """
    if ir.num_qubits > qpu.num_qubits:
        raise TooManyQubits(
            f"circuit needs {ir.num_qubits} qubits, {qpu.qpu_id} has {qpu.num_qubits}"
        )
    counts = interaction_counts(ir)
    logical_order = sorted(range(ir.num_qubits), key=lambda q: (-counts[q], q))
    physical_order = sorted(range(qpu.num_qubits), key=lambda p: (-qpu.degree(p), p))
    mapping = [0] * ir.num_qubits
    for logical, physical in zip(logical_order, physical_order):
        mapping[logical] = physical
    return Layout(tuple(mapping))


def shortest_path(adjacency: dict[int, tuple[int, ...]], src: int, dst: int) -> list[int]:
    """Lexicographically smallest shortest path from src to dst (BFS distances)."""
    if src == dst:
        return [src]
    dist = {dst: 0}
    frontier = deque([dst])
    while frontier:
        node = frontier.popleft()
        for nb in adjacency[node]:
            if nb not in dist:
                dist[nb] = dist[node] + 1
                frontier.append(nb)
    if src not in dist:
        raise DisconnectedTarget(f"no path between physical qubits {src} and {dst}")
    path = [src]
    node = src
    while node != dst:
        node = min(nb for nb in adjacency[node] if dist.get(nb, -1) == dist[node] - 1)
        path.append(node)
    return path


def route(ir: CircuitIR, layout: Layout, qpu: QpuDescriptor) -> TranspileResult:
    """Insert SWAPs so every 2-qubit gate lands on a coupling edge.

    Gates are processed in program order. A non-adjacent 2-qubit gate walks its
    first operand along the lexicographically smallest shortest path toward the
    second, one SWAP per hop, updating the layout as it goes.
    """
    adjacency = qpu.adjacency
    edges = qpu.coupling_edges
    l2p = list(layout.mapping)
    p2l: dict[int, int] = {p: l for l, p in enumerate(l2p)}
    phys_gates: list[GateIR] = []
    swap_count = 0

    for g in ir.gates:
        if g.name is GateKind.BARRIER:
            phys_gates.append(g)
            continue
        if g.name is GateKind.MEASURE:
            phys_gates.append(GateIR(GateKind.MEASURE, (l2p[g.qubits[0]],), cbit=g.cbit))
            continue
        if not g.is_two_qubit:
            phys_gates.append(GateIR(g.name, (l2p[g.qubits[0]],), param=g.param))
            continue
        pa, pb = l2p[g.qubits[0]], l2p[g.qubits[1]]
        if normalize_edge(pa, pb) not in edges:
            path = shortest_path(adjacency, pa, pb)
            for u, v in zip(path[:-2], path[1:-1]):
                phys_gates.append(GateIR(GateKind.SWAP, (u, v)))
                swap_count += 1
                lu, lv = p2l.get(u), p2l.get(v)
                if lu is not None:
                    l2p[lu] = v
                if lv is not None:
                    l2p[lv] = u
                p2l[u], p2l[v] = lv, lu
                if p2l[u] is None:
                    del p2l[u]
                if p2l[v] is None:
                    del p2l[v]
            pa = path[-2]
        phys_gates.append(GateIR(g.name, (pa, pb), param=g.param))

    physical = CircuitIR(num_qubits=qpu.num_qubits, num_cbits=ir.num_cbits, gates=tuple(phys_gates))
    layers = build_layers(physical)
    durations = GateDurations(qpu.calibration.t_1q, qpu.calibration.t_2q, qpu.calibration.t_ro)
    result = TranspileResult(
        qpu_id=qpu.qpu_id,
        physical=physical,
        final_layout=Layout(tuple(l2p)),
        swap_count=swap_count,
        physical_depth=len(layers),
        predicted_fidelity=1.0,
        predicted_duration=layered_duration(layers, durations),
    )
    return result


def estimate_fidelity(result: TranspileResult, cal: CalibrationData) -> float:
    """Product-of-fidelities success estimate for a routed circuit.

    Each 1-qubit gate contributes its qubit's fidelity, each 2-qubit gate its
    edge's, a SWAP the edge fidelity cubed, and each measurement
    ``1 - (eps0 + eps1) / 2`` on its qubit.
    """
    fid = 1.0
    for g in result.physical.gates:
        if g.name is GateKind.BARRIER:
            continue
        if g.name is GateKind.MEASURE:
            q = g.qubits[0]
            fid *= 1.0 - (cal.readout_eps0[q] + cal.readout_eps1[q]) / 2.0
        elif g.name is GateKind.SWAP:
            fid *= cal.f2q[normalize_edge(*g.qubits)] ** 3
        elif g.is_two_qubit:
            fid *= cal.f2q[normalize_edge(*g.qubits)]
        else:
            fid *= cal.f1q[g.qubits[0]]
    return fid


def transpile(ir: CircuitIR, qpu: QpuDescriptor, cal: CalibrationData | None = None) -> TranspileResult:
    """Layout, route, and cost a circuit against one QPU's calibration.

    The routing structure depends only on (circuit, topology) and is cached on
    the descriptor; gate timings never drift, so only the fidelity estimate is
    recomputed per calibration.
    """
    cal = cal if cal is not None else qpu.calibration
    structural = qpu.route_cache.get(ir)
    if structural is None:
        structural = route(ir, initial_layout(ir, qpu), qpu)
        qpu.route_cache[ir] = structural
    return TranspileResult(
        qpu_id=structural.qpu_id,
        physical=structural.physical,
        final_layout=structural.final_layout,
        swap_count=structural.swap_count,
        physical_depth=structural.physical_depth,
        predicted_fidelity=estimate_fidelity(structural, cal),
        predicted_duration=structural.predicted_duration,
    )


def trial_transpile(
    ir: CircuitIR, candidates: list[tuple[QpuDescriptor, CalibrationSnapshot]]
) -> list[tuple[str, TranspileResult]]:
    """Route against every candidate and rank by routing cost.

    Ascending swap count, then descending predicted fidelity, then ascending
    qpu_id — a total order, so the ranking is evaluation-order independent.
    """
    results = [
        (qpu.qpu_id, transpile(ir, qpu, snapshot.calibration)) for qpu, snapshot in candidates
    ]
    results.sort(key=lambda item: (item[1].swap_count, -item[1].predicted_fidelity, item[0]))
    return results
