"""QASM parsing, intermediate representation, and static circuit analysis."""

from .ir import (
    CircuitIR,
    GateIR,
    GateKind,
    InvalidGate,
    ONE_QUBIT_GATES,
    ROTATION_GATES,
    TWO_QUBIT_GATES,
    to_qasm,
)
from .parser import ParseError, SemanticError, parse_qasm
from .analysis import (
    CircuitProfile,
    DEEP_CIRCUIT_TAG,
    FleetNominal,
    GateDurations,
    HIGH_FIDELITY_TAG,
    build_layers,
    layered_duration,
    profile,
    tag,
)

__all__ = [
    "CircuitIR",
    "CircuitProfile",
    "DEEP_CIRCUIT_TAG",
    "FleetNominal",
    "GateDurations",
    "GateIR",
    "GateKind",
    "HIGH_FIDELITY_TAG",
    "InvalidGate",
    "ONE_QUBIT_GATES",
    "ParseError",
    "ROTATION_GATES",
    "SemanticError",
    "TWO_QUBIT_GATES",
    "build_layers",
    "layered_duration",
    "parse_qasm",
    "profile",
    "tag",
    "to_qasm",
]
