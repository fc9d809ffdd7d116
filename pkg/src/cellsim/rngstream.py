"""Deterministic random streams.

Every stochastic component draws from a named substream derived from the
run seed, so results do not depend on evaluation order and any run can be
replayed bit-for-bit.
"""

import zlib

import numpy as np
from scipy.special import ndtri

_MULT1 = np.uint64(0xBF58476D1CE4E5B9)
_MULT2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _key_part(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part) & 0xFFFFFFFF


def substream(seed, *key):
    """Return a numpy Generator for the substream named by ``key``.

    Streams with distinct keys are statistically independent; the same
    (seed, key) always yields the same stream.
    """
    parts = tuple(_key_part(k) for k in key)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=parts))


def _splitmix64(x):
    # x: uint64 ndarray (>= 1-d, so overflow wraps silently mod 2**64)
    x = (x + _GOLDEN).astype(np.uint64)
    x = ((x ^ (x >> np.uint64(30))) * _MULT1).astype(np.uint64)
    x = ((x ^ (x >> np.uint64(27))) * _MULT2).astype(np.uint64)
    return x ^ (x >> np.uint64(31))


def hash_uniform(seed, tag, *index_arrays):
    """Hash (seed, tag, i1, i2, ...) elementwise to uniforms in (0, 1).

    index_arrays broadcast against each other. The hash is a counter-mode
    splitmix64 chain, so the value for a given key never depends on how
    many other keys are evaluated.
    """
    shape = np.broadcast_shapes(*(np.shape(a) for a in index_arrays)) if index_arrays else ()
    h = np.atleast_1d(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF) ^ np.uint64(zlib.crc32(tag.encode("utf-8"))))
    h = _splitmix64(h)
    for arr in index_arrays:
        a = np.atleast_1d(np.asarray(arr, dtype=np.uint64))
        h = _splitmix64(np.broadcast_to(h, np.broadcast_shapes(h.shape, a.shape)).copy() ^ (a + _GOLDEN))
    # 53 mantissa bits, offset by half a ulp to stay strictly inside (0, 1)
    u = ((h >> np.uint64(11)).astype(np.float64) + 0.5) * (2.0 ** -53)
    return float(u[0]) if shape == () else u.reshape(shape)


def hash_normal(seed, tag, *index_arrays):
    """Standard normal draws keyed by (seed, tag, indices) via inverse CDF."""
    return ndtri(hash_uniform(seed, tag, *index_arrays))
