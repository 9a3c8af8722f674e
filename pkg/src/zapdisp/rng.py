"""Vectorised Philox4x32-10 counter-based generator.

Each draw is a pure function of (key, counter), so a particle's random
stream is fixed by (seed, particle index, event index) no matter how
particles are batched or which thread simulates them.
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_LO = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)


def philox4x32(counter, key, rounds: int = 10):
    """Apply Philox4x32 to broadcastable counter words.

    ``counter`` is a sequence of four uint32 arrays (or scalars); ``key`` a
    pair of uint32.  Returns four uint32 arrays.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint32) for c in counter)
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    k0 = np.uint32(key[0])
    k1 = np.uint32(key[1])
    for r in range(rounds):
        if r:
            k0 = np.uint32((int(k0) + int(_W0)) & 0xFFFFFFFF)
            k1 = np.uint32((int(k1) + int(_W1)) & 0xFFFFFFFF)
        p0 = c0.astype(np.uint64) * _M0
        p1 = c2.astype(np.uint64) * _M1
        hi0 = (p0 >> _SHIFT).astype(np.uint32)
        lo0 = (p0 & _LO).astype(np.uint32)
        hi1 = (p1 >> _SHIFT).astype(np.uint32)
        lo1 = (p1 & _LO).astype(np.uint32)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


def seed_key(seed: int) -> tuple[int, int]:
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return seed & 0xFFFFFFFF, seed >> 32


def to_unit_open(hi: np.ndarray, lo: np.ndarray) -> np.ndarray:
    """52-bit uniform strictly inside (0, 1) from two uint32 words.

    Only the top 26 bits of each word are used; 52 bits keep the largest
    value, 1 - 2**-53, exactly representable below 1.
    """
    bits = (hi.astype(np.uint64) >> np.uint64(6)) * np.uint64(1 << 26) \
        + (lo.astype(np.uint64) >> np.uint64(6))
    return (bits.astype(np.float64) + 0.5) * 2.0 ** -52


class ParticleStreams:
    """Per-particle streams: block ``event`` of particle ``index`` is
    Philox(key=seed, counter=(event, index_lo, index_hi, tag))."""

    def __init__(self, seed: int, tag: int = 0):
        self.key = seed_key(seed)
        self.tag = np.uint32(tag)

    def block(self, index: np.ndarray, event):
        index = np.asarray(index, dtype=np.uint64)
        lo = (index & _LO).astype(np.uint32)
        hi = (index >> _SHIFT).astype(np.uint32)
        ev = np.asarray(event, dtype=np.uint64).astype(np.uint32)
        return philox4x32((ev, lo, hi, self.tag), self.key)
