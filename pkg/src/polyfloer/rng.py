"""Portable seeded generator for initial data.

The generator is a plain 64-bit linear congruential recurrence

    state <- (6364136223846793005 * state + 1442695040888963407) mod 2^64

(Knuth's MMIX constants). The initial state is the seed itself. Each draw
advances the state once and returns ``(state >> 11) * 2^-53``, a double in
[0, 1). Anything that reproduces these three lines reproduces the golden
trajectory files bit for bit, independent of language or numpy version.
"""
from __future__ import annotations

import numpy as np

MULTIPLIER = 6364136223846793005
INCREMENT = 1442695040888963407
_MASK = (1 << 64) - 1


class LinearRNG:
    def __init__(self, seed: int):
        if seed < 0 or seed > _MASK:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.state = int(seed)

    def next_u64(self) -> int:
        self.state = (MULTIPLIER * self.state + INCREMENT) & _MASK
        return self.state

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def uniform(self, shape, low: float = -1.0, high: float = 1.0) -> np.ndarray:
        """Array of draws in [low, high), filled in C order."""
        n = int(np.prod(shape))
        vals = np.fromiter((self.random() for _ in range(n)), dtype=np.float64, count=n)
        return (low + (high - low) * vals).reshape(shape)
