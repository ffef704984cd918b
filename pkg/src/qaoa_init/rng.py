"""Deterministic random streams used everywhere the toolkit needs randomness.

The generator is SplitMix64, fully specified below so that instance sets,
parameter draws and training runs reproduce bit-for-bit on any platform and
with any numpy version:

    state  <- (state + 0x9E3779B97F4A7C15) mod 2^64
    z      <- state
    z      <- ((z XOR (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    z      <- ((z XOR (z >> 27)) * 0x94D049BB133111EB) mod 2^64
    output <- z XOR (z >> 31)

Doubles are drawn as (output >> 11) * 2^-53, uniform in [0, 1).
"""

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix(z):
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


class StableRng:
    """SplitMix64 stream. Not cryptographic; stable across platforms."""

    def __init__(self, seed):
        self._state = int(seed) & _MASK64

    def next_u64(self):
        self._state = (self._state + _GAMMA) & _MASK64
        return _mix(self._state)

    def random(self):
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, lo, hi):
        return lo + (hi - lo) * self.random()

    def uniform_array(self, lo, hi, size):
        return np.array([self.uniform(lo, hi) for _ in range(size)], dtype=np.float64)

    def randint(self, n):
        """Uniform integer in [0, n), unbiased via rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (_MASK64 + 1) - ((_MASK64 + 1) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def shuffle(self, items):
        """Fisher-Yates shuffle, in place."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]


def derive_seed(*parts):
    """Fold integer identifiers into a 64-bit sub-stream seed.

    Used to give every (experiment, cell, instance, ...) its own independent
    stream so results do not depend on execution order.
    """
    h = 0
    for p in parts:
        h = _mix(((h ^ (int(p) & _MASK64)) + _GAMMA) & _MASK64)
    return h


def prob_tag(p):
    """Stable integer tag for an edge probability (4 decimal places)."""
    return int(round(p * 10000.0))
