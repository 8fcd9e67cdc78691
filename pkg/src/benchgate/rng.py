"""Seeded random streams.

Two generators are used:

* ``SplitMix64`` drives plan generation. It is a few lines in any language, so
  external runners can regenerate an RMIT plan from its seed.
* ``stream(seed, *keys)`` gives a numpy PCG64 generator for bulk resampling.
  Keys (commit id, metric id, ...) are hashed into the SeedSequence spawn key,
  so adding a benchmark never shifts the draws of another one.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection, without modulo bias."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def coin(self) -> bool:
        return bool(self.next_u64() >> 63)

    def shuffle(self, items: list) -> list:
        """Fisher-Yates, highest index first. Returns a new list."""
        out = list(items)
        for i in range(len(out) - 1, 0, -1):
            j = self.below(i + 1)
            out[i], out[j] = out[j], out[i]
        return out


def key_word(key) -> int:
    """Stable 64-bit word for a stream key (ints pass through)."""
    if isinstance(key, (int, np.integer)) and not isinstance(key, bool):
        return int(key) & _MASK
    digest = hashlib.blake2b(str(key).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(seed: int, *keys) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=seed & _MASK, spawn_key=tuple(key_word(k) for k in keys))
    return np.random.Generator(np.random.PCG64(seq))
