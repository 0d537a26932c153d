"""Seeded SplitMix64 stream with uniform, Gaussian and shuffle helpers.

SplitMix64 is counter based: output ``k`` is ``mix(seed + (k+1)*GAMMA)``.
That lets blocks of draws be produced with vectorized uint64 arithmetic while
staying bit-identical to the scalar recurrence.
"""

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def derive_seed(*parts):
    """Fold integers into one 64-bit seed (order sensitive)."""
    acc = 0
    for part in parts:
        acc = SplitMix64((acc ^ (int(part) & _MASK64)) & _MASK64).next_u64()
    return acc


class SplitMix64:
    """Deterministic 64-bit generator."""

    def __init__(self, seed):
        self._state = int(seed) & _MASK64

    def next_u64(self):
        return int(self.u64(1)[0])

    def u64(self, count):
        """Next ``count`` raw 64-bit outputs."""
        steps = np.arange(1, count + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self._state) + steps * GAMMA
            out = _mix(z)
        self._state = (self._state + count * int(GAMMA)) & _MASK64
        return out

    def uniform(self, count):
        """Doubles in [0, 1) from the top 53 bits."""
        return (self.u64(count) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def uniform_range(self, low, high, count):
        return low + (high - low) * self.uniform(count)

    def normal(self, count):
        """Standard normals by the Box-Muller transform (pairs of uniforms)."""
        pairs = (count + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        # 1 - u lies in (0, 1], keeping the log finite.
        radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        angle = 2.0 * np.pi * u[:, 1]
        z = np.column_stack((radius * np.cos(angle), radius * np.sin(angle))).ravel()
        return z[:count]

    def sample_without_replacement(self, population, k):
        """First ``k`` slots of a Fisher-Yates shuffle of ``range(population)``."""
        if not 0 <= k <= population:
            raise ValueError(f"cannot draw {k} of {population}")
        perm = np.arange(population, dtype=np.int64)
        draws = self.uniform(k)
        for i in range(k):
            j = i + int(draws[i] * (population - i))
            perm[i], perm[j] = perm[j], perm[i]
        return perm[:k].copy()
