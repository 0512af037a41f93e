"""Named random streams derived from a single integer seed.

Every consumer asks for a stream by name, e.g. ``stream(seed, "bench", "data", 3)``.
Streams are keyed by a stable hash of the name parts, so adding a new stream
never changes the numbers produced by existing ones.
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _words(part) -> list[int]:
    digest = hashlib.sha256(repr(part).encode("utf-8")).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


def seed_sequence(seed: int, *names) -> np.random.SeedSequence:
    entropy = [int(seed) & _MASK64]
    for part in names:
        entropy.extend(_words(part))
    return np.random.SeedSequence(entropy)


def stream(seed: int, *names) -> np.random.Generator:
    """Return an independent PCG64 generator for the stream ``names``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *names)))
