"""Deterministic pseudo-random numbers: xoshiro256** seeded via splitmix64.

The generator is pinned (rather than delegating to numpy) so that parameter
initialization and synthetic data are bit-identical across platforms and
library versions.  Reference: https://prng.di.unimi.it/
"""

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_DOUBLE_SCALE = 2.0 ** -53


def _splitmix64(state: int):
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Rng:
    """xoshiro256** generator with a splitmix64-expanded 64-bit seed."""

    def __init__(self, seed: int):
        sm = seed & _MASK64
        state = []
        for _ in range(4):
            sm, word = _splitmix64(sm)
            state.append(word)
        # xoshiro must not start from the all-zero state; splitmix output
        # never yields four zero words for any seed, but guard regardless.
        if not any(state):
            state[0] = 1
        self._s = state

    def next_uint64(self) -> int:
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

    def spawn(self) -> "Rng":
        """Child generator with a seed drawn from this stream."""
        return Rng(self.next_uint64())

    def random(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_uint64() >> 11) * _DOUBLE_SCALE

    def uniform(self, low: float, high: float, size=None):
        if size is None:
            return low + (high - low) * self.random()
        n = int(np.prod(size))
        vals = np.empty(n, dtype=np.float64)
        for i in range(n):
            vals[i] = low + (high - low) * self.random()
        return vals.reshape(size)

    def normal(self, size=None, std: float = 1.0):
        """Gaussian draws via Box-Muller (pairs, deterministic order)."""
        n = 1 if size is None else int(np.prod(size))
        vals = np.empty(n + (n & 1), dtype=np.float64)
        for i in range(0, len(vals), 2):
            u1 = max(self.random(), _DOUBLE_SCALE)  # keep log() finite
            u2 = self.random()
            r = math.sqrt(-2.0 * math.log(u1))
            vals[i] = r * math.cos(2.0 * math.pi * u2)
            vals[i + 1] = r * math.sin(2.0 * math.pi * u2)
        vals = vals[:n] * std
        if size is None:
            return float(vals[0])
        return vals.reshape(size)

    def randint(self, n: int) -> int:
        """Integer in [0, n)."""
        return min(int(self.random() * n), n - 1)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def choice_weighted(self, weights) -> int:
        """Index drawn with probability proportional to ``weights``."""
        total = float(np.sum(weights))
        u = self.random() * total
        acc = 0.0
        for i, w in enumerate(weights):
            acc += float(w)
            if u < acc:
                return i
        return len(weights) - 1
