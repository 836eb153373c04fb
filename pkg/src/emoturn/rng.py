"""Deterministic PRNG used wherever partitions must be reproducible bit-for-bit.

The generator is SplitMix64 (Steele, Lea & Flood's ``splitmix64``): state
advances by the odd constant 0x9E3779B97F4A7C15 and each output is finalized
with two xor-shift-multiply rounds (0xBF58476D1CE4E5B9, 0x94D049BB133111EB).
It is fully specified by these three constants, so any implementation in any
language produces the same stream for the same seed.
"""

from __future__ import annotations

MASK64 = 0xFFFFFFFFFFFFFFFF

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """64-bit SplitMix generator with helpers for shuffling and sampling."""

    def __init__(self, seed: int) -> None:
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection, unbiased for any n >= 1."""
        if n <= 0:
            raise ValueError("randint bound must be positive")
        limit = MASK64 - (MASK64 % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher–Yates shuffle, iterating from the last index down."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def choice(self, items: list):
        return items[self.randint(len(items))]


def derive_seed(*parts: object) -> int:
    """Stable 64-bit seed from a tuple of printable parts (blake2b based)."""
    import hashlib

    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")
