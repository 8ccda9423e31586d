"""Deterministic pseudo-random generator used for splits, synthetic data and init.

The generator is a splitmix64 stream (Steele, Lea & Flood 2014): 64-bit state
advanced by the golden-ratio increment and finalized with two xor-multiply
mixing rounds.  Pure integer arithmetic, so identical seeds give identical
streams on every platform and Python build.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *parts) -> int:
    """Fold sub-component tags (ints or strings) into a child seed.

    Used to hand every sub-component (split, shuffle, batch sampling, ...)
    its own independent stream from one experiment seed.
    """
    h = _mix(seed & _MASK64)
    for part in parts:
        if isinstance(part, str):
            for byte in part.encode("utf-8"):
                h = _mix((h ^ byte) & _MASK64)
        else:
            h = _mix((h ^ (int(part) & _MASK64)) & _MASK64)
    return h


class SplitMix64:
    """Sequential splitmix64 stream with the sampling helpers the package needs."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return _mix(self._state)

    def uniform(self) -> float:
        """Uniform double in [0, 1) using the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def integers(self, low: int, high: int) -> int:
        """Uniform integer in [low, high) without modulo bias (rejection sampling)."""
        if high <= low:
            raise ValueError(f"empty integer range [{low}, {high})")
        span = high - low
        limit = (1 << 64) - ((1 << 64) % span)
        while True:
            u = self.next_u64()
            if u < limit:
                return low + (u % span)

    def permutation(self, n: int) -> list[int]:
        """Fisher-Yates permutation of range(n)."""
        out = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.integers(0, i + 1)
            out[i], out[j] = out[j], out[i]
        return out

    def sample(self, n: int, k: int) -> list[int]:
        """k distinct indices from range(n), drawn without replacement."""
        if k > n:
            raise ValueError(f"cannot sample {k} from {n}")
        return self.permutation(n)[:k]
