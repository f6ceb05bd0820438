"""Block floating point: a run of signed integer mantissas sharing one exponent.

A block of width ``w`` with exponent ``e`` holds the value
``M * 2**(e - (w - 1))`` for each mantissa ``M``; the mantissa is read as a
fraction in (-1, 1). Mantissas are symmetric, ``|M| <= 2**(w-1) - 1``.
"""
from __future__ import annotations

import contextlib
import math
from contextvars import ContextVar
from dataclasses import dataclass, field

import numpy as np

from hbfp.rounding import NEAREST_EVEN, RoundingMode, round_array, round_tiled

E_MIN = -(2**20)
MIN_WIDTH = 2
MAX_WIDTH = 32
ACCUMULATOR_BITS = 64


class BfpError(ValueError):
    pass


class ConversionError(BfpError):
    """Non-finite value met while converting to BFP."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DimensionError(BfpError):
    pass


class CapacityError(BfpError):
    """An integer accumulator would be too narrow for the requested reduction."""


def check_width(w: int) -> int:
    if not isinstance(w, (int, np.integer)) or not MIN_WIDTH <= w <= MAX_WIDTH:
        raise BfpError(f"mantissa width must be an integer in [{MIN_WIDTH}, {MAX_WIDTH}], got {w!r}")
    return int(w)


def max_mantissa(w: int) -> int:
    return 2 ** (w - 1) - 1


def check_accumulator(w: int, n: int) -> None:
    """Raise unless ``n`` products of width-``w`` mantissas fit a 64-bit accumulator."""
    need = 2 * w + math.ceil(math.log2(max(n, 1)))
    if need > ACCUMULATOR_BITS:
        raise CapacityError(
            f"{n} products at width {w} need {need} accumulator bits, only {ACCUMULATOR_BITS} available"
        )


def exact_in_float64(w: int, n: int) -> bool:
    """True when any partial sum of ``n`` width-``w`` products is an integer below 2**53."""
    return 2 * (w - 1) + math.ceil(math.log2(max(n, 1))) <= 53


# -- conversion instrumentation ---------------------------------------------

@dataclass
class ConversionLog:
    """Records every FP->BFP conversion made while the log is active."""

    records: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.records)

    @property
    def elements(self) -> int:
        return sum(r[2] for r in self.records)


_active_logs: ContextVar[tuple] = ContextVar("hbfp_conversion_logs", default=())


@contextlib.contextmanager
def conversion_log():
    log = ConversionLog()
    token = _active_logs.set(_active_logs.get() + (log,))
    try:
        yield log
    finally:
        _active_logs.reset(token)


def _record(kind, width, size):
    for log in _active_logs.get():
        log.records.append((kind, width, size))


# -- block type -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BfpBlock:
    mantissas: np.ndarray
    exponent: int
    width: int

    def __post_init__(self):
        w = check_width(self.width)
        m = np.array(self.mantissas, dtype=np.int64).reshape(-1)
        if m.size < 1:
            raise BfpError("a BFP block needs at least one mantissa")
        if np.any(np.abs(m) > max_mantissa(w)):
            raise BfpError(f"mantissa outside the symmetric range of width {w}")
        if not np.any(m) and self.exponent != E_MIN:
            raise BfpError("an all-zero block must carry the E_MIN exponent")
        m.setflags(write=False)
        object.__setattr__(self, "mantissas", m)
        object.__setattr__(self, "exponent", int(self.exponent))
        object.__setattr__(self, "width", w)

    def __len__(self):
        return self.mantissas.size

    def __eq__(self, other):
        if not isinstance(other, BfpBlock):
            return NotImplemented
        return (
            self.width == other.width
            and self.exponent == other.exponent
            and np.array_equal(self.mantissas, other.mantissas)
        )

    @property
    def lsb(self) -> float:
        """Quantization step of this block."""
        return math.ldexp(1.0, self.exponent - (self.width - 1))

    def to_float(self) -> np.ndarray:
        return bfp_to_fp(self)


# -- conversion -------------------------------------------------------------

def _check_finite(x: np.ndarray) -> None:
    bad = ~np.isfinite(x)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        if len(idx) == 1:
            idx = idx[0]
        raise ConversionError(f"non-finite value {x[idx]!r} at index {idx}", index=idx)


def shared_exponents(x: np.ndarray, w: int, tile: tuple[int, int], mode: RoundingMode) -> np.ndarray:
    """One exponent per ``tile``-shaped block of a 2-D array.

    The exponent is that of the block's largest magnitude plus one, so the
    leading mantissa bit is used. Under round-to-nearest, a maximum that
    would round past the top code gets the next exponent instead of being
    clamped, which keeps every element within half a step.
    """
    rows, cols = x.shape
    tr, tc = tile
    nr, nc = -(-rows // tr), -(-cols // tc)
    a = np.abs(x)
    if (rows, cols) != (nr * tr, nc * tc):
        a = np.pad(a, ((0, nr * tr - rows), (0, nc * tc - cols)))
    amax = a.reshape(nr, tr, nc, tc).max(axis=(1, 3))
    _, e = np.frexp(amax)
    e = e.astype(np.int64)
    if not mode.is_stochastic:
        top = np.rint(np.ldexp(amax, (w - 1 - e).astype(np.int32)))
        e = np.where(top > max_mantissa(w), e + 1, e)
    return np.where(amax == 0, E_MIN, e)


def expand_exponents(e: np.ndarray, shape: tuple[int, int], tile: tuple[int, int]) -> np.ndarray:
    return np.repeat(np.repeat(e, tile[0], axis=0), tile[1], axis=1)[: shape[0], : shape[1]]


def quantize_tiles(x: np.ndarray, w: int, tile: tuple[int, int], mode: RoundingMode, kind: str = "tiled",
                   per_tile_streams: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Convert a 2-D array to tile-shared-exponent mantissas.

    Returns ``(mantissas, exponents)`` with one exponent per tile. With
    ``per_tile_streams`` stochastic draws come from one stream per tile,
    otherwise from a single stream over the whole array in row-major order.
    """
    w = check_width(w)
    x = np.asarray(x, dtype=np.float64)
    _check_finite(x)
    _record(kind, w, x.size)
    e = shared_exponents(x, w, tile, mode)
    emap = expand_exponents(e, x.shape, tile)
    scaled = np.ldexp(x, (w - 1 - emap).astype(np.int32))
    if per_tile_streams:
        m = round_tiled(scaled, mode, tile)
    else:
        m = round_array(scaled, mode)
    top = max_mantissa(w)
    m = np.clip(m, -top, top).astype(np.int64)
    return m, e


def fp_to_bfp(values, w: int, mode: RoundingMode = NEAREST_EVEN) -> BfpBlock:
    """Convert a vector of reals to one BFP block of width ``w``.

    Stochastic mode draws from the stream seeded by ``mode.seed``, one draw
    per element, in order.
    """
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise BfpError("cannot convert an empty slice")
    _check_finite(v)
    m, e = quantize_tiles(v[None, :], w, (1, v.size), mode, kind="block", per_tile_streams=False)
    return BfpBlock(m[0], int(e[0, 0]), w)


def bfp_to_fp(block: BfpBlock) -> np.ndarray:
    return np.ldexp(block.mantissas.astype(np.float64), block.exponent - (block.width - 1))


def bfp_dot(a: BfpBlock, b: BfpBlock) -> float:
    """Dot product with a single 64-bit integer accumulator and one final scale."""
    if len(a) != len(b):
        raise DimensionError(f"block lengths differ: {len(a)} vs {len(b)}")
    if a.width != b.width:
        raise DimensionError(f"block widths differ: {a.width} vs {b.width}")
    w = a.width
    check_accumulator(w, len(a))
    acc = int(np.dot(a.mantissas, b.mantissas))
    return math.ldexp(float(acc), a.exponent + b.exponent - 2 * (w - 1))
