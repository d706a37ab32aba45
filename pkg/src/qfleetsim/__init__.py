"""qfleetsim: a deterministic simulator for quantum cloud job scheduling.

Jobs carrying quantum metadata (fidelity floors, qubit counts, wait budgets,
priorities) are validated, profiled, scheduled onto a drifting QPU fleet under
pluggable policies, transpiled with SWAP routing, executed as noisy shot
batches, and post-processed with readout-error inversion and zero-noise
extrapolation, with a QoS loop feeding execution times and health flags back
into the system.
"""

from .errors import QFleetError

__version__ = "0.1.0"

__all__ = ["QFleetError", "__version__"]
