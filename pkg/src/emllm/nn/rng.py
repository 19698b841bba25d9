"""Seeded PRNG for weight init and data shuffling.

xoshiro256** with splitmix64 seed expansion. Implemented here (rather than
relying on numpy's generators) so that parameter trajectories are pinned to
a documented algorithm and stay bit-identical across library upgrades.

References: the xoshiro256** update is s' = rotl(s1*5, 7)*9 with the usual
xor/shift state mixing; splitmix64 expands one 64-bit seed into the four
state words.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31), state


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256:
    """xoshiro256** generator with helpers for init and shuffling."""

    def __init__(self, seed: int):
        s = []
        state = seed & _MASK64
        for _ in range(4):
            word, state = _splitmix64(state)
            s.append(word)
        # All-zero state is invalid for xoshiro; splitmix64 never yields it
        # for four consecutive words, but guard anyway.
        if not any(s):
            s[0] = 1
        self._s = s

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        """Uniform double in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0**-53)

    def uniform(self, low: float, high: float, shape: tuple[int, ...]) -> np.ndarray:
        n = 1
        for d in shape:
            n *= d
        vals = [low + (high - low) * self.random() for _ in range(n)]
        return np.array(vals, dtype=np.float64).reshape(shape)

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        nbits = (n - 1).bit_length()
        while True:
            r = self.next_u64() >> (64 - nbits) if nbits else 0
            if r < n:
                return r

    def shuffle(self, seq: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(seq) - 1, 0, -1):
            j = self.randbelow(i + 1)
            seq[i], seq[j] = seq[j], seq[i]
