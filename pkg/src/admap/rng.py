"""Deterministic, parallel-safe random streams.

Every stochastic component owns a counter-based Philox generator keyed by
the master seed plus a tuple of stream identifiers.  Streams are
independent of scheduling order, so parallel trials reproduce exactly.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key_part(part) -> int:
    if isinstance(part, (bool, int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.blake2b(str(part).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(master_seed: int, *ids) -> np.random.Generator:
    """Return the Philox generator for the stream named by ``ids``.

    ids may mix integers and strings; strings are hashed with a stable
    64-bit digest so the mapping never depends on PYTHONHASHSEED.
    """
    key = (int(master_seed) & 0xFFFFFFFFFFFFFFFF,) + tuple(_key_part(p) for p in ids)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))
