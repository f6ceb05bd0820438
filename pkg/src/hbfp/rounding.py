"""Rounding modes used when mantissas are truncated to a fixed width."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from hbfp.xorshift import XorshiftState, derive_seed, draws, tiled_draws, xorshift_next

NEAREST = "nearest"
STOCHASTIC = "stochastic"


@dataclass(frozen=True)
class RoundingMode:
    """Either round-half-to-even or seeded stochastic rounding.

    A stochastic mode consumes exactly one 32-bit draw per rounded element,
    in element order, from a stream seeded by ``seed``.
    """

    kind: str = NEAREST
    seed: int = 1

    def __post_init__(self):
        if self.kind not in (NEAREST, STOCHASTIC):
            raise ValueError(f"unknown rounding mode {self.kind!r}")
        if self.kind == STOCHASTIC:
            XorshiftState(self.seed)

    @classmethod
    def nearest(cls) -> "RoundingMode":
        return cls(NEAREST)

    @classmethod
    def stochastic(cls, seed: int) -> "RoundingMode":
        return cls(STOCHASTIC, seed)

    @property
    def is_stochastic(self) -> bool:
        return self.kind == STOCHASTIC

    def fork(self, *keys: int) -> "RoundingMode":
        """Independent child stream keyed by integers; nearest mode is returned as is."""
        if not self.is_stochastic:
            return self
        return RoundingMode(STOCHASTIC, derive_seed(self.seed, *keys))


NEAREST_EVEN = RoundingMode.nearest()


def round_value(x: float, mode: RoundingMode, rng: XorshiftState | None = None) -> tuple[int, XorshiftState | None]:
    """Round one real to an integer, threading the RNG state for stochastic mode."""
    if not mode.is_stochastic:
        return int(np.rint(x)), rng
    if rng is None:
        rng = XorshiftState(mode.seed)
    rng, draw = xorshift_next(rng)
    fl = math.floor(x)
    frac = x - fl
    return fl + int(draw < math.ldexp(frac, 32)), rng


def _stochastic(x: np.ndarray, r: np.ndarray) -> np.ndarray:
    fl = np.floor(x)
    return fl + (r < np.ldexp(x - fl, 32))


def round_array(x: np.ndarray, mode: RoundingMode) -> np.ndarray:
    """Round a flat or n-d array in row-major element order from one stream."""
    x = np.asarray(x, dtype=np.float64)
    if not mode.is_stochastic:
        return np.rint(x)
    r, _ = draws(mode.seed, x.size)
    return _stochastic(x, r.reshape(x.shape))


def round_tiled(x: np.ndarray, mode: RoundingMode, tile: tuple[int, int]) -> np.ndarray:
    """Round a 2-D array with one independent stream per tile.

    Tile ``(r, c)`` draws from ``mode.fork(r, c)`` in tile-local row-major order.
    """
    if not mode.is_stochastic:
        return np.rint(x)
    nr = -(-x.shape[0] // tile[0])
    nc = -(-x.shape[1] // tile[1])
    seeds = derive_seed(mode.seed, np.arange(nr)[:, None], np.arange(nc)[None, :])
    seeds = np.broadcast_to(seeds, (nr, nc))
    return _stochastic(x, tiled_draws(seeds, x.shape, tile))
