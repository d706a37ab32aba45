"""Counter-based random substreams: label-derived keys off one master seed.

Each subsystem (drift, arrivals, per-job execution) draws from its own Philox
stream keyed by a hash of (master_seed, labels), so adding or reordering a
subsystem never perturbs another's draws.
"""

from __future__ import annotations

import hashlib

import numpy as np


def substream(master_seed: int, *labels: object) -> np.random.Generator:
    material = repr((int(master_seed),) + tuple(labels)).encode()
    digest = hashlib.blake2s(material, digest_size=16).digest()
    key = int.from_bytes(digest, "little")
    return np.random.Generator(np.random.Philox(key=key))
