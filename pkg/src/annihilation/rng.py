"""Counter-based random streams.

Every random number is a pure function of ``(seed, tag, path, draw)``, so a
path produces the same numbers whether it is simulated alone, in a batch, or
on another worker.  The generator is Philox4x32-10 evaluated with numpy
``uint64`` arithmetic, vectorized over paths.
"""

from __future__ import annotations

import zlib

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_SHIFT = np.uint64(32)
_TWO_M53 = 2.0 ** -53


def philox4x32(counter, key, rounds=10):
    """Philox4x32 block function.

    Parameters
    ----------
    counter : 4-tuple of array_like
        32-bit counter words; arrays broadcast against each other.
    key : 2-tuple of int
        32-bit key words.

    Returns
    -------
    tuple of 4 ``uint64`` arrays holding 32-bit output words.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & _MASK for c in counter)
    k0 = np.uint64(int(key[0]) & 0xFFFFFFFF)
    k1 = np.uint64(int(key[1]) & 0xFFFFFFFF)
    for _ in range(rounds):
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = (p1 >> _SHIFT) ^ c1 ^ k0, p1 & _MASK, (p0 >> _SHIFT) ^ c3 ^ k1, p0 & _MASK
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


def _tag_code(tag):
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFF
    return zlib.crc32(str(tag).encode("utf-8"))


class CounterRNG:
    """Stateless random source keyed by ``(seed, tag)``.

    ``path`` and ``draw`` index the counter; distinct ``(path, draw)`` pairs
    give independent blocks of four 32-bit words.
    """

    def __init__(self, seed, tag="default"):
        seed = int(seed)
        if seed < 0:
            raise ValueError("seed must be nonnegative")
        self.seed = seed
        self.tag = tag
        self._key = (seed & 0xFFFFFFFF, ((seed >> 32) ^ _tag_code(tag)) & 0xFFFFFFFF)

    def __repr__(self):
        return f"CounterRNG(seed={self.seed}, tag={self.tag!r})"

    def block(self, paths, draw):
        paths = np.asarray(paths, dtype=np.uint64)
        draw = np.asarray(draw, dtype=np.uint64)
        return philox4x32(
            (paths & _MASK, paths >> _SHIFT, draw & _MASK, draw >> _SHIFT), self._key
        )

    def uniform_pair(self, paths, draw):
        """Two independent 53-bit uniforms on [0, 1) per path."""
        w0, w1, w2, w3 = self.block(paths, draw)
        u1 = ((w0 >> np.uint64(5)) * np.uint64(67108864) + (w1 >> np.uint64(6))).astype(np.float64)
        u2 = ((w2 >> np.uint64(5)) * np.uint64(67108864) + (w3 >> np.uint64(6))).astype(np.float64)
        return u1 * _TWO_M53, u2 * _TWO_M53

    def normal_pair(self, paths, draw):
        """Two independent standard normals per path (Box-Muller)."""
        u1, u2 = self.uniform_pair(paths, draw)
        radius = np.sqrt(-2.0 * np.log1p(-u1))
        angle = 2.0 * np.pi * u2
        return radius * np.cos(angle), radius * np.sin(angle)

    def normals(self, paths, index):
        """Standard normal number ``index`` of each path's normal sequence."""
        z0, z1 = self.normal_pair(paths, index // 2)
        return z0 if index % 2 == 0 else z1


class NormalStream:
    """Sequential standard normals for a fixed set of paths.

    Consumes one Philox block per two draws; draw ``k`` of path ``p`` equals
    ``CounterRNG.normals(p, k)`` regardless of how paths are batched.
    """

    def __init__(self, rng, paths, start=0):
        self.rng = rng
        self.paths = np.asarray(paths, dtype=np.uint64)
        self.index = int(start)
        self._spare = None

    def next(self):
        if self.index % 2 == 0:
            z0, z1 = self.rng.normal_pair(self.paths, self.index // 2)
            self._spare = z1
            out = z0
        else:
            if self._spare is None:
                _, self._spare = self.rng.normal_pair(self.paths, self.index // 2)
            out = self._spare
            self._spare = None
        self.index += 1
        return out
