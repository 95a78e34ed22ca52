"""Deterministic random streams based on the SplitMix64 generator.

All randomness in this package (synthetic data, fold shuffles, bootstrap
draws) flows through SplitMix64 so that identical seeds reproduce identical
streams on every platform, independent of any runtime's default generator.

SplitMix64 is a counter-based 64-bit generator: output ``i`` of a stream
seeded with ``s`` is ``mix64(s + (i + 1) * GOLDEN)`` where
``GOLDEN = 0x9E3779B97F4A7C15`` and ``mix64`` is

    z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27;  z *= 0x94D049BB133111EB
    z ^= z >> 31

with all arithmetic modulo 2**64. Floats in [0, 1) take the top 53 bits:
``(u64 >> 11) * 2**-53``.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """Scalar SplitMix64 finalizer (pure-Python, modulo 2**64)."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *tags: int | str) -> int:
    """Derive an independent substream seed from ``seed`` and a tag path.

    Strings are folded byte-by-byte, integers in one step. Deterministic
    and platform-independent; used to give every dataset, feature field,
    fold shuffle, and bootstrap replicate its own stream.
    """
    h = mix64(seed)
    for tag in tags:
        if isinstance(tag, str):
            for b in tag.encode("utf-8"):
                h = mix64(h ^ b)
        else:
            h = mix64(h ^ (int(tag) & _MASK64))
    return h


def _mix64_array(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Stateful view over a SplitMix64 counter stream."""

    def __init__(self, seed: int):
        self._seed = np.uint64(seed & _MASK64)
        self._counter = 0

    def u64(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit outputs as a uint64 array."""
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            return _mix64_array(self._seed + idx * np.uint64(_GOLDEN))

    def uniform(self, n: int) -> np.ndarray:
        """Next ``n`` floats uniform in [0, 1)."""
        return (self.u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def integers(self, n: int, bound: int) -> np.ndarray:
        """Next ``n`` integers uniform in [0, bound) via the float path."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return np.minimum((self.uniform(n) * bound).astype(np.int64), bound - 1)

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n) by sorting random keys."""
        keys = self.u64(n)
        return np.argsort(keys, kind="stable")

    def normal(self, n: int) -> np.ndarray:
        """Next ``n`` standard normal deviates (Box-Muller on the stream)."""
        m = (n + 1) // 2
        u1 = np.maximum(self.uniform(m), 2.0**-53)
        u2 = self.uniform(m)
        r = np.sqrt(-2.0 * np.log(u1))
        out = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
        return out[:n]
