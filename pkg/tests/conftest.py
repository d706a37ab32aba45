"""Shared builders: QPU topologies, calibrations, and random circuit generators."""

from __future__ import annotations

import numpy as np
import pytest

from qfleetsim.circuit import CircuitIR, GateIR, GateKind
from qfleetsim.fleet import CalibrationData, QpuDescriptor


def line_edges(n: int) -> set[tuple[int, int]]:
    return {(i, i + 1) for i in range(n - 1)}


def ring_edges(n: int) -> set[tuple[int, int]]:
    return line_edges(n) | {(0, n - 1)}


def make_qpu(
    qpu_id: str = "qpu-0",
    num_qubits: int = 3,
    edges: set[tuple[int, int]] | None = None,
    **cal_overrides,
) -> QpuDescriptor:
    edges = edges if edges is not None else line_edges(num_qubits)
    cal = CalibrationData.uniform(num_qubits, edges, **cal_overrides)
    return QpuDescriptor(qpu_id, num_qubits, frozenset(edges), cal)


def random_connected_edges(rng: np.random.Generator, n: int) -> set[tuple[int, int]]:
    """Random spanning tree plus a few extra edges."""
    edges = set()
    nodes = list(rng.permutation(n))
    for i in range(1, n):
        a = nodes[i]
        b = nodes[int(rng.integers(i))]
        edges.add((min(a, b), max(a, b)))
    for _ in range(int(rng.integers(n))):
        a, b = rng.choice(n, size=2, replace=False)
        edges.add((min(int(a), int(b)), max(int(a), int(b))))
    return edges


_1Q = [GateKind.H, GateKind.X, GateKind.Y, GateKind.Z, GateKind.S, GateKind.SDG, GateKind.T, GateKind.TDG]
_2Q = [GateKind.CX, GateKind.CZ, GateKind.SWAP]
_ROT = [GateKind.RX, GateKind.RY, GateKind.RZ]


def random_circuit(
    rng: np.random.Generator,
    max_qubits: int = 8,
    max_gates: int = 40,
    include_measure: bool = True,
) -> CircuitIR:
    n = int(rng.integers(1, max_qubits + 1))
    num_gates = int(rng.integers(0, max_gates + 1))
    gates = []
    for _ in range(num_gates):
        roll = rng.random()
        if n >= 2 and roll < 0.45:
            a, b = (int(x) for x in rng.choice(n, size=2, replace=False))
            gates.append(GateIR(_2Q[int(rng.integers(len(_2Q)))], (a, b)))
        elif include_measure and roll < 0.55:
            q = int(rng.integers(n))
            gates.append(GateIR(GateKind.MEASURE, (q,), cbit=q))
        elif roll < 0.8:
            gates.append(GateIR(_1Q[int(rng.integers(len(_1Q)))], (int(rng.integers(n)),)))
        else:
            kind = _ROT[int(rng.integers(len(_ROT)))]
            gates.append(GateIR(kind, (int(rng.integers(n)),), param=float(rng.uniform(-3.2, 3.2))))
    return CircuitIR(num_qubits=n, num_cbits=n, gates=tuple(gates))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
