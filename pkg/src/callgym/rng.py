"""Seeded random streams.

Every episode owns one 64-bit seed.  Independent sub-streams (generation,
shuffling, solver noise, agents) are keyed by a domain label so adding draws
to one stream never perturbs another.  Streams use the counter-based Philox
bit generator.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def derive_key(seed: int, *domain: object) -> int:
    """128-bit Philox key derived from ``seed`` and a domain label path."""
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    h = hashlib.blake2b(digest_size=16, person=b"callgym-rng")
    h.update(seed.to_bytes(8, "little"))
    for part in domain:
        h.update(b"\x1f")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


def stream(seed: int, *domain: object) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=derive_key(seed, *domain)))
