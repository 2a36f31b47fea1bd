"""Seeded random number generation with a fully documented generator.

Every random quantity in this package is drawn from the xorshift64* stream
below so that experiments are reproducible from their integer seed alone,
independently of numpy's global state and of the compiled-kernel backend.

Generator
---------
State is a nonzero 64-bit integer, initialised by one splitmix64 step of
the user seed (state 0 is remapped to the splitmix64 increment).  Each draw
updates ``x ^= x >> 12; x ^= x << 25; x ^= x >> 27`` and outputs
``x * 0x2545F4914F6CDD1D`` (all mod 2^64).

Uniforms take the top 53 bits: ``u = (out >> 11) * 2^-53`` lies in [0, 1).
Normal pairs use the Box-Muller transform with ``u1 = ((out >> 11) + 1) *
2^-53`` in (0, 1] (so the logarithm is always finite) and ``u2`` in [0, 1):

    z0 = sqrt(-2 ln u1) cos(2 pi u2),   z1 = sqrt(-2 ln u1) sin(2 pi u2).

Integer state updates are exact; the floating transform relies on IEEE-754
doubles and the platform libm for log/cos/sin, which is the usual limit of
cross-platform bit-reproducibility.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_XORSHIFT_MULT = 0x2545F4914F6CDD1D


def splitmix64(z: int) -> int:
    """One output of the splitmix64 sequence started at ``z``."""
    z = (z + _SPLITMIX_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class Xorshift64Star:
    """xorshift64* stream; see the module docstring for the exact recipe."""

    def __init__(self, seed: int):
        state = splitmix64(seed & _MASK64)
        self._state = state if state != 0 else _SPLITMIX_GAMMA

    def next_u64(self) -> int:
        x = self._state
        x ^= (x >> 12)
        x ^= (x << 25) & _MASK64
        x ^= (x >> 27)
        self._state = x
        return (x * _XORSHIFT_MULT) & _MASK64

    def raw(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.uint64)
        for i in range(n):
            out[i] = self.next_u64()
        return out

    def uniforms(self, n: int) -> np.ndarray:
        """n doubles uniform in [0, 1)."""
        bits = self.raw(n) >> np.uint64(11)
        return bits.astype(np.float64) * 2.0**-53

    def normals(self, n: int) -> np.ndarray:
        """n i.i.d. standard normal doubles via Box-Muller pairs.

        Each pair consumes two consecutive raw draws (u1 then u2).
        """
        if n == 0:
            return np.zeros(0)
        pairs = (n + 1) // 2
        bits = self.raw(2 * pairs) >> np.uint64(11)
        u1 = (bits[0::2].astype(np.float64) + 1.0) * 2.0**-53
        u2 = bits[1::2].astype(np.float64) * 2.0**-53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * np.pi) * u2
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]


def substream_seed(seed: int, index: int) -> int:
    """Seed of the (seed, index) substream: both arguments pass through
    splitmix64, so consumption order of substreams never matters."""
    return splitmix64(seed & _MASK64) ^ splitmix64((index ^ _SPLITMIX_GAMMA) & _MASK64)


def stream(seed: int, index: int) -> Xorshift64Star:
    """Independent substream generator for (seed, index), one per sweep row
    or per sampled point."""
    return Xorshift64Star(substream_seed(seed, index))
