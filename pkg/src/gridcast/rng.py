"""Counter-based SplitMix64 stream.

The n-th output of a stream seeded with ``s`` is ``mix(s + n * GOLDEN)``
(n starting at 1, arithmetic modulo 2**64), where ``mix`` is the SplitMix64
finalizer. Uniform doubles take the top 53 bits. The integer stream is
exact on every platform; normals go through ``log``/``cos`` and so inherit
the platform's libm.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def mix64(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    def __init__(self, seed: int):
        self.seed = np.uint64(int(seed) & _MASK)
        self.counter = 0

    def u64(self, n: int) -> np.ndarray:
        k = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            state = self.seed + k * GOLDEN
        return mix64(state)

    def uniform(self, n: int) -> np.ndarray:
        """Doubles in [0, 1)."""
        return (self.u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, n: int) -> np.ndarray:
        u1 = 1.0 - self.uniform(n)
        u2 = self.uniform(n)
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def permutation(self, n: int) -> np.ndarray:
        # argsort of random keys; stable sort keeps ties deterministic
        return np.argsort(self.u64(n), kind="stable")

    def choice(self, n: int, k: int) -> np.ndarray:
        """``k`` distinct positions out of ``n``, in ascending order."""
        return np.sort(self.permutation(n)[:k])

    def spawn(self, key: int) -> "SplitMix64":
        """Independent child stream keyed by an integer."""
        child = int(mix64(np.uint64((int(self.seed) ^ (key * 0xD1B54A32D192ED03)) & _MASK)))
        return SplitMix64(child)
