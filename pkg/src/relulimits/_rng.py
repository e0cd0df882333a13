"""Deterministic randomness for dataset synthesis, initialization, and training.

Every stochastic choice in this package flows through :class:`SplitMix64`, a
counter-based 64-bit generator: output ``i`` is the SplitMix64 finalizer
applied to ``seed + (i + 1) * GAMMA`` (Weyl sequence increment), which makes
draws vectorizable and the stream a pure function of ``(seed, counter)``.
Gaussian variates use the Box-Muller transform over pairs of uniforms.

The generator is specified here in full so results are bit-reproducible
across platforms and library versions.  Matching any third-party RNG is a
non-goal.
"""

from __future__ import annotations

import hashlib

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64_MASK = (1 << 64) - 1
# (u64 >> 11) leaves 53 uniformly random bits, the full float64 mantissa width
_INV_2_53 = float(2.0**-53)


def _finalize(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Seedable SplitMix64 stream with uniform, Gaussian, and shuffle draws."""

    def __init__(self, seed: int) -> None:
        if not isinstance(seed, (int, np.integer)):
            raise ValueError(f"seed must be an integer, got {type(seed).__name__}")
        self._seed = np.uint64(int(seed) & _U64_MASK)
        self._count = 0

    def u64(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit outputs as a uint64 array."""
        if n < 0:
            raise ValueError("n must be non-negative")
        idx = np.arange(self._count + 1, self._count + n + 1, dtype=np.uint64)
        self._count += n
        with np.errstate(over="ignore"):
            return _finalize(self._seed + idx * _GAMMA)

    def uniform(self, n: int) -> np.ndarray:
        """``n`` floats uniform on [0, 1)."""
        return (self.u64(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def normal(self, n: int) -> np.ndarray:
        """``n`` standard normal floats via Box-Muller.

        Each pair of outputs consumes exactly two uniforms; odd ``n`` draws a
        full pair and discards the second value, keeping the stream position a
        deterministic function of the call sequence.
        """
        if n < 0:
            raise ValueError("n must be non-negative")
        pairs = (n + 1) // 2
        if pairs == 0:
            return np.empty(0, dtype=np.float64)
        # map to (0, 1] so log() is finite
        u1 = 1.0 - self.uniform(pairs)
        u2 = self.uniform(pairs)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def integer(self, bound: int) -> int:
        """One integer uniform on [0, bound).  Modulo reduction; the bias is
        below 2**-40 for any bound this package uses."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return int(self.u64(1)[0] % np.uint64(bound))

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        perm = np.arange(n, dtype=np.int64)
        if n < 2:
            return perm
        draws = self.u64(n - 1)
        for i in range(n - 1, 0, -1):
            j = int(draws[n - 1 - i] % np.uint64(i + 1))
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def fork(self, tag: str) -> "SplitMix64":
        """Independent labeled substream.

        The child seed hashes the parent seed with the tag, so adding or
        removing draws on one stream never shifts another (training relies on
        this to keep shuffle order independent of e.g. anchor draws).
        """
        digest = hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest()
        mixed = int(self._seed) ^ int.from_bytes(digest, "little")
        with np.errstate(over="ignore"):
            child = _finalize(np.uint64(mixed) + _GAMMA)
        return SplitMix64(int(child))
