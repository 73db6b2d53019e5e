"""Counter-based Gaussian streams built on the SplitMix64 finalizer.

Every random number is a pure function of (seed, position), so blocks of
paths can be generated in any order or on any number of workers and still
reproduce bit for bit.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_MASK = (1 << 64) - 1
GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def mix64(z):
    """SplitMix64 avalanche on uint64 values (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    shape = z.shape
    z = z.reshape(-1)  # 0-d arithmetic would warn on the intended wraparound
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return (z ^ (z >> np.uint64(31))).reshape(shape)


def derive(master, *keys):
    """Child seed of ``master`` along the integer path ``keys``.

    Scalar keys give a Python int; array-valued keys give a uint64 array.
    """
    h = mix64(np.array([int(master) & _MASK], dtype=np.uint64))
    shape = ()
    for key in keys:
        k = np.asarray(key, dtype=np.int64).astype(np.uint64)
        shape = np.broadcast_shapes(shape, k.shape)
        h = mix64(h ^ mix64(k.reshape(-1) + GOLDEN))
    return int(h[0]) if shape == () else h.reshape(shape)


def uniforms(seeds, n: int) -> np.ndarray:
    """(len(seeds), n) open-interval uniforms; row r is the stream of seeds[r]."""
    seeds = np.atleast_1d(np.asarray(seeds, dtype=np.uint64))
    j = np.arange(1, n + 1, dtype=np.uint64)
    x = mix64(seeds[:, None] + j[None, :] * GOLDEN)
    return ((x >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normals(seeds, n: int) -> np.ndarray:
    """Standard normals by inverse CDF of 53-bit uniforms."""
    return ndtri(uniforms(seeds, n))
