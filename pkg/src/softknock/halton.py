"""Deterministic Halton grids on the unit cube.

The grid is the discrete reference measure that rank maps transport onto:
point ``i``, coordinate ``j`` is the radical inverse of ``start_index + i``
in the ``j``-th prime base. Index 0 (the all-zeros point) is skipped by
default because a grid point at the origin creates degenerate ties in the
transport cost rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import InvalidInputError, UnsupportedDimensionError

MAX_DIMENSION = 512


def _first_primes(count: int) -> tuple[int, ...]:
    # Eratosthenes with a bound generous enough for the first 512 primes.
    limit = 4000
    sieve = np.ones(limit + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, int(limit**0.5) + 1):
        if sieve[p]:
            sieve[p * p :: p] = False
    primes = np.flatnonzero(sieve)[:count]
    if len(primes) < count:
        raise RuntimeError("prime sieve bound too small")
    return tuple(int(p) for p in primes)


PRIMES: tuple[int, ...] = _first_primes(MAX_DIMENSION)


@dataclass(frozen=True)
class HaltonGrid:
    """An ``m x d`` matrix of low-discrepancy points in ``[0, 1)^d``."""

    points: np.ndarray
    bases: tuple[int, ...]
    start_index: int

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def _radical_inverses(indices: np.ndarray, base: int) -> np.ndarray:
    """Vectorized radical inverse of integer ``indices`` in ``base``."""
    out = np.zeros(len(indices))
    n = indices.copy()
    scale = 1.0 / base
    while n.any():
        out += (n % base) * scale
        n //= base
        scale /= base
    return out


@lru_cache(maxsize=64)
def _cached_points(m: int, d: int, start_index: int) -> np.ndarray:
    indices = np.arange(start_index, start_index + m, dtype=np.int64)
    pts = np.empty((m, d))
    for j in range(d):
        pts[:, j] = _radical_inverses(indices, PRIMES[j])
    pts.flags.writeable = False
    return pts


def generate(m: int, d: int, start_index: int = 1) -> HaltonGrid:
    """Generate a Halton grid of ``m`` points in ``d`` dimensions.

    Regeneration with the same arguments is bit-identical. Raises
    UnsupportedDimensionError when ``d`` exceeds the prime table
    (``MAX_DIMENSION`` bases are precomputed).
    """
    if m < 1:
        raise InvalidInputError(f"need at least one point, got m={m}")
    if d < 1:
        raise InvalidInputError(f"need at least one dimension, got d={d}")
    if d > MAX_DIMENSION:
        raise UnsupportedDimensionError(
            f"d={d} exceeds the {MAX_DIMENSION} precomputed prime bases"
        )
    if start_index < 1:
        raise InvalidInputError(f"start_index must be >= 1, got {start_index}")
    pts = _cached_points(m, d, start_index).copy()
    return HaltonGrid(points=pts, bases=PRIMES[:d], start_index=start_index)


def grid_points(m: int, d: int, start_index: int = 1) -> np.ndarray:
    """Read-only cached points array; used on hot paths that only need it."""
    if not (1 <= d <= MAX_DIMENSION):
        raise UnsupportedDimensionError(
            f"d={d} outside the supported range [1, {MAX_DIMENSION}]"
        )
    if m < 1 or start_index < 1:
        raise InvalidInputError("m and start_index must be >= 1")
    return _cached_points(m, d, start_index)
