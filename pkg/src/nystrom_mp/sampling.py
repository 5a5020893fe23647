"""Seeded random streams shared by the sketching and test-problem code.

Uniforms come from numpy's PCG64 bit generator, whose output is identical
across platforms for a given seed. Gaussian variates are produced from
those uniforms with the Box-Muller transform rather than numpy's ziggurat
so that the mapping from seed to samples is fully documented here.
"""

from __future__ import annotations

import numpy as np


def _generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def standard_normal(shape, seed: int) -> np.ndarray:
    """Standard Gaussian array of ``shape`` filled in row-major order."""
    shape = tuple(np.atleast_1d(shape).astype(int))
    count = int(np.prod(shape))
    half = (count + 1) // 2
    rng = _generator(seed)
    u1 = 1.0 - rng.random(half)  # (0, 1], keeps log finite
    u2 = rng.random(half)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    z = np.empty(2 * half)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[:count].reshape(shape)


def uniform_open(n: int, seed: int) -> np.ndarray:
    """``n`` uniform samples strictly inside (0, 1).

    Each value is the midpoint of one of 2**52 equal cells, so neither end
    point can occur.
    """
    rng = _generator(seed)
    cells = rng.integers(0, 2**52, size=int(n), dtype=np.int64)
    return (cells.astype(np.float64) + 0.5) / 2.0**52
