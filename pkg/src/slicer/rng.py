"""Counter-based 64-bit PRNG (splitmix recurrence).

The generator is written out in full so any port of the file formats can
reproduce the exact same fixture tensors and tie-break orderings:

    state_{n+1} = (state_n + 0x9E3779B97F4A7C15) mod 2^64
    out_n       = mix(state_{n+1})

    mix(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
            z ^= z >> 27; z *= 0x94D049BB133111EB
            z ^= z >> 31           (all mod 2^64)

Uniform doubles are out / 2^64 in [0, 1); gaussians come from the
Box-Muller transform applied to consecutive uniform pairs.
"""

import math

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    """Sequential splitmix64 stream."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        return _mix(self._state)

    def next_unit(self) -> float:
        """Uniform double in [0, 1)."""
        return self.next_u64() / 2.0**64

    def next_uniform(self, lo: float = -1.0, hi: float = 1.0) -> float:
        return lo + (hi - lo) * self.next_unit()

    def next_gaussian_pair(self) -> tuple[float, float]:
        # u1 shifted into (0, 1] so the log is always defined.
        u1 = (self.next_u64() + 1) / 2.0**64
        u2 = self.next_unit()
        r = math.sqrt(-2.0 * math.log(u1))
        return r * math.cos(2.0 * math.pi * u2), r * math.sin(2.0 * math.pi * u2)


def hash_index(seed: int, index: int) -> int:
    """Stateless per-index random key, used for deterministic tie-breaking."""
    return _mix((seed + (index + 1) * _GOLDEN) & _MASK)


def hash_indices(seed: int, indices) -> "np.ndarray":
    """Vectorized hash_index over an array of indices."""
    import numpy as np

    with np.errstate(over="ignore"):
        z = (np.uint64(seed) + (indices.astype(np.uint64) + np.uint64(1)) * np.uint64(_GOLDEN))
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))
