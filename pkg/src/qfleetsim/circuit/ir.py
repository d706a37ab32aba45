"""Gate-level intermediate representation for the supported QASM subset."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from ..errors import QFleetError


class GateKind(str, Enum):
    H = "h"
    X = "x"
    Y = "y"
    Z = "z"
    S = "s"
    SDG = "sdg"
    T = "t"
    TDG = "tdg"
    RX = "rx"
    RY = "ry"
    RZ = "rz"
    CX = "cx"
    CZ = "cz"
    SWAP = "swap"
    MEASURE = "measure"
    BARRIER = "barrier"


ROTATION_GATES = frozenset({GateKind.RX, GateKind.RY, GateKind.RZ})
TWO_QUBIT_GATES = frozenset({GateKind.CX, GateKind.CZ, GateKind.SWAP})
ONE_QUBIT_GATES = frozenset(
    {
        GateKind.H,
        GateKind.X,
        GateKind.Y,
        GateKind.Z,
        GateKind.S,
        GateKind.SDG,
        GateKind.T,
        GateKind.TDG,
        GateKind.RX,
        GateKind.RY,
        GateKind.RZ,
    }
)


class InvalidGate(QFleetError):
    """A GateIR violates its structural invariants."""


@dataclass(frozen=True)
class GateIR:
    """One operation over global qubit indices.

    ``param`` is present exactly for rotation gates (radians); ``cbit`` exactly
    for measurements. Barriers carry no indices and only constrain ordering.
    """

    name: GateKind
    qubits: tuple[int, ...] = ()
    param: float | None = None
    cbit: int | None = None

    def __post_init__(self) -> None:
        if len(set(self.qubits)) != len(self.qubits):
            raise InvalidGate(f"{self.name.value}: duplicate qubit operands {self.qubits}")
        if self.name is GateKind.BARRIER:
            expected = 0
        elif self.name in TWO_QUBIT_GATES:
            expected = 2
        else:
            expected = 1
        if len(self.qubits) != expected:
            raise InvalidGate(
                f"{self.name.value}: expected {expected} qubit(s), got {len(self.qubits)}"
            )
        if (self.param is not None) != (self.name in ROTATION_GATES):
            raise InvalidGate(f"{self.name.value}: rotation parameter mismatch")
        if (self.cbit is not None) != (self.name is GateKind.MEASURE):
            raise InvalidGate(f"{self.name.value}: classical bit only valid on measure")

    @property
    def is_two_qubit(self) -> bool:
        return self.name in TWO_QUBIT_GATES


@dataclass(frozen=True)
class CircuitIR:
    """A parsed circuit: registers flattened to global indices."""

    num_qubits: int
    num_cbits: int
    gates: tuple[GateIR, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.num_qubits < 1:
            raise InvalidGate("circuit must declare at least one qubit")
        if self.num_cbits < 0:
            raise InvalidGate("negative classical register size")
        for g in self.gates:
            for q in g.qubits:
                if not 0 <= q < self.num_qubits:
                    raise InvalidGate(f"{g.name.value}: qubit index {q} out of range")
            if g.cbit is not None and not 0 <= g.cbit < self.num_cbits:
                raise InvalidGate(f"measure: classical bit {g.cbit} out of range")

    @property
    def measured_cbit_qubits(self) -> dict[int, int]:
        """Map classical bit -> qubit written by the last measure targeting it."""
        out: dict[int, int] = {}
        for g in self.gates:
            if g.name is GateKind.MEASURE:
                out[g.cbit] = g.qubits[0]
        return out


def to_qasm(ir: CircuitIR) -> str:
    """Print the IR in the canonical single-register form.

    Reparsing the output yields an identical IR (round-trip contract).
    """
    lines = ['OPENQASM 2.0;', 'include "qelib1.inc";', f"qreg q[{ir.num_qubits}];"]
    if ir.num_cbits > 0:
        lines.append(f"creg c[{ir.num_cbits}];")
    for g in ir.gates:
        if g.name is GateKind.BARRIER:
            lines.append("barrier;")
        elif g.name is GateKind.MEASURE:
            lines.append(f"measure q[{g.qubits[0]}] -> c[{g.cbit}];")
        elif g.param is not None:
            lines.append(f"{g.name.value}({g.param!r}) q[{g.qubits[0]}];")
        else:
            args = ",".join(f"q[{q}]" for q in g.qubits)
            lines.append(f"{g.name.value} {args};")
    return "\n".join(lines) + "\n"
