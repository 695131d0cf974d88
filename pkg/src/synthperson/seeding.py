"""Deterministic RNG fan-out from a single master seed.

Every random decision in the pipeline draws from a generator derived from
(master seed, entity kind, entity indices).  Derivation is order-free, so
identities, frames, and crops can be produced in any parallel schedule and
still come out identical.
"""

import hashlib

import numpy as np


def _kind_key(kind: str) -> int:
    # Stable 64-bit digest of the kind string (Python's hash() is salted).
    digest = hashlib.blake2s(kind.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def rng_for(master_seed: int, kind: str, *indices: int) -> np.random.Generator:
    """Generator keyed by (master_seed, kind, indices), independent of call order."""
    entropy = (master_seed & 0xFFFFFFFFFFFFFFFF, _kind_key(kind)) + tuple(
        int(i) & 0xFFFFFFFFFFFFFFFF for i in indices
    )
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
