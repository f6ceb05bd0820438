"""32-bit Xorshift generator and seed derivation for stochastic rounding.

The generator is the classic (13, 17, 5) triple. Streams are explicit:
callers either thread an :class:`XorshiftState` through :func:`xorshift_next`
or ask for a block of draws with :func:`draws`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

MASK32 = 0xFFFFFFFF
_ZERO_SEED_REPLACEMENT = 0x9E3779B9


@dataclass(frozen=True)
class XorshiftState:
    state: int

    def __post_init__(self):
        if not 0 <= self.state <= MASK32:
            raise ValueError(f"xorshift state must fit in 32 bits, got {self.state}")
        if self.state == 0:
            raise ValueError("xorshift state must be nonzero (zero is a fixed point)")


def xorshift_next(state: XorshiftState) -> tuple[XorshiftState, int]:
    """Advance one step; the new state is also the output."""
    y = state.state
    y ^= (y << 13) & MASK32
    y ^= y >> 17
    y ^= (y << 5) & MASK32
    return XorshiftState(y), y


@numba.njit(cache=True)
def _step(y):
    y ^= (y << 13) & 0xFFFFFFFF
    y ^= y >> 17
    y ^= (y << 5) & 0xFFFFFFFF
    return y


@numba.njit(cache=True)
def _fill(seed, n):
    out = np.empty(n, dtype=np.uint32)
    y = np.int64(seed)
    for i in range(n):
        y = _step(y)
        out[i] = y
    return out, y


@numba.njit(cache=True)
def _fill_tiled(seeds, rows, cols, tr, tc):
    # seeds: (nr, nc) grid, one independent stream per tile, tile-local row-major order
    out = np.empty((rows, cols), dtype=np.uint32)
    nr, nc = seeds.shape
    for r in range(nr):
        r0 = r * tr
        r1 = min(r0 + tr, rows)
        for c in range(nc):
            c0 = c * tc
            c1 = min(c0 + tc, cols)
            y = np.int64(seeds[r, c])
            for i in range(r0, r1):
                for j in range(c0, c1):
                    y = _step(y)
                    out[i, j] = y
    return out


def draws(seed: int, n: int) -> tuple[np.ndarray, int]:
    """Return ``n`` consecutive outputs starting from ``seed`` and the final state."""
    XorshiftState(seed)
    out, final = _fill(seed, n)
    return out, int(final) if n else seed


def tiled_draws(seeds: np.ndarray, shape: tuple[int, int], tile: tuple[int, int]) -> np.ndarray:
    seeds = np.ascontiguousarray(seeds, dtype=np.int64)
    if np.any(seeds == 0):
        raise ValueError("xorshift seeds must be nonzero")
    return _fill_tiled(seeds, shape[0], shape[1], tile[0], tile[1])


def _splitmix(z):
    z = z + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def derive_seed(master, *keys):
    """Hash a master seed and integer keys to a nonzero 32-bit seed.

    Broadcasts over array-valued keys, so a whole grid of per-tile seeds can
    be derived in one call. Scalar inputs give a Python ``int``.
    """
    with np.errstate(over="ignore"):
        h = _splitmix(np.asarray(master, dtype=np.uint64) & np.uint64(MASK32))
        for k in keys:
            k = np.asarray(k, dtype=np.int64).astype(np.uint64)
            h = _splitmix(h ^ k)
    out = (h >> np.uint64(32)).astype(np.uint32)
    out = np.where(out == 0, np.uint32(_ZERO_SEED_REPLACEMENT), out)
    if out.ndim == 0:
        return int(out)
    return out
