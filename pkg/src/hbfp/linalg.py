"""Dot-product operations on BFP matrices.

Weights are held as :class:`BfpTiledMatrix` (one exponent per tile),
activations and gradients as :class:`RowBlockedMatrix` (one exponent per
row). Inside a tile strip the products are summed exactly as integers;
strip results are scaled and summed in floating point in ascending strip
order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from hbfp.bfp import (
    BfpBlock,
    DimensionError,
    E_MIN,
    check_accumulator,
    check_width,
    exact_in_float64,
    expand_exponents,
    quantize_tiles,
)
from hbfp.rounding import NEAREST_EVEN, RoundingMode

UNTILED = None


def _tile_shape(tile, shape):
    if tile is UNTILED:
        return (max(shape[0], 1), max(shape[1], 1))
    if isinstance(tile, (tuple, list)):
        tr, tc = (int(t) for t in tile)
    else:
        tr = tc = int(tile)
    if tr < 1 or tc < 1:
        raise ValueError(f"tile size must be >= 1, got {tile!r}")
    return tr, tc


def _as_2d(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True, eq=False)
class BfpTiledMatrix:
    """A matrix split into ``tile_shape`` tiles, each tile one BFP block.

    Mantissas are kept densely as a ``(rows, cols)`` integer array; the
    exponent grid has one entry per tile. Edge tiles are ragged.
    """

    mantissas: np.ndarray
    exponents: np.ndarray
    width: int
    tile_shape: tuple
    tile: object = UNTILED

    @property
    def shape(self):
        return self.mantissas.shape

    @property
    def rows(self):
        return self.mantissas.shape[0]

    @property
    def cols(self):
        return self.mantissas.shape[1]

    @property
    def grid_shape(self):
        return self.exponents.shape

    @property
    def T(self) -> "BfpTiledMatrix":
        """Transpose; tiles move with their exponents, no requantization."""
        tile = self.tile if not isinstance(self.tile, tuple) else self.tile[::-1]
        return BfpTiledMatrix(self.mantissas.T, self.exponents.T, self.width, self.tile_shape[::-1], tile)

    def block(self, r: int, c: int) -> BfpBlock:
        tr, tc = self.tile_shape
        m = self.mantissas[r * tr:(r + 1) * tr, c * tc:(c + 1) * tc]
        return BfpBlock(m.reshape(-1), int(self.exponents[r, c]), self.width)

    @property
    def blocks(self) -> list:
        nr, nc = self.grid_shape
        return [[self.block(r, c) for c in range(nc)] for r in range(nr)]

    def exponent_map(self) -> np.ndarray:
        return expand_exponents(self.exponents, self.shape, self.tile_shape)

    def dequantize(self) -> np.ndarray:
        return np.ldexp(self.mantissas.astype(np.float64), (self.exponent_map() - (self.width - 1)).astype(np.int32))

    @property
    def effective_tile_shape(self):
        """Tile extents clamped to the matrix, so every tiling that yields one tile compares equal."""
        return min(self.tile_shape[0], max(self.rows, 1)), min(self.tile_shape[1], max(self.cols, 1))

    def equals(self, other: "BfpTiledMatrix") -> bool:
        """Same partition, width, exponents and mantissas."""
        return (
            self.width == other.width
            and self.shape == other.shape
            and self.effective_tile_shape == other.effective_tile_shape
            and np.array_equal(self.exponents, other.exponents)
            and np.array_equal(self.mantissas, other.mantissas)
        )


@dataclass(frozen=True, eq=False)
class RowBlockedMatrix:
    """One BFP block per row (``axis="row"``) or per column (``axis="col"``)."""

    mantissas: np.ndarray
    exponents: np.ndarray
    width: int
    axis: str = "row"

    @property
    def shape(self):
        return self.mantissas.shape

    @property
    def rows(self):
        return self.mantissas.shape[0]

    @property
    def cols(self):
        return self.mantissas.shape[1]

    def block(self, i: int) -> BfpBlock:
        m = self.mantissas[i] if self.axis == "row" else self.mantissas[:, i]
        return BfpBlock(m, int(self.exponents[i]), self.width)

    @property
    def blocks(self) -> list:
        return [self.block(i) for i in range(self.exponents.size)]

    def dequantize(self) -> np.ndarray:
        e = self.exponents - (self.width - 1)
        e = e[:, None] if self.axis == "row" else e[None, :]
        return np.ldexp(self.mantissas.astype(np.float64), e.astype(np.int32))


def tile_matrix(m, tile, w: int, mode: RoundingMode = NEAREST_EVEN) -> BfpTiledMatrix:
    """Quantize a 2-D matrix with one shared exponent per tile.

    ``tile`` is an int ``T`` for square tiles, a ``(rows, cols)`` pair, or
    ``UNTILED`` for a single exponent over the whole matrix. Stochastic
    rounding uses one stream per tile derived from the mode's seed and the
    tile coordinates.
    """
    m = _as_2d(m)
    shape = _tile_shape(tile, m.shape)
    try:
        mant, exps = quantize_tiles(m, w, shape, mode, kind="tile")
    except Exception as exc:
        index = getattr(exc, "index", None)
        if index is not None:
            i, j = index
            exc.args = (f"{exc.args[0]} (tile {i // shape[0]}, {j // shape[1]})",)
            exc.tile = (i // shape[0], j // shape[1])
        raise
    return BfpTiledMatrix(mant, exps, w, shape, tile)


def row_block(m, orientation: str = "row", w: int = 8, mode: RoundingMode = NEAREST_EVEN) -> RowBlockedMatrix:
    """One exponent per row (per training input) or per column.

    The column orientation is computed as the row orientation of the
    transpose, so both agree element for element, stochastic draws included.
    """
    m = _as_2d(m)
    if orientation not in ("row", "col"):
        raise ValueError(f"orientation must be 'row' or 'col', got {orientation!r}")
    src = m if orientation == "row" else m.T
    mant, exps = quantize_tiles(src, w, (1, max(src.shape[1], 1)), mode, kind="row")
    if orientation == "col":
        mant = mant.T
    return RowBlockedMatrix(mant, exps[:, 0], w, orientation)


def _int_product(a: np.ndarray, b: np.ndarray, w: int) -> np.ndarray:
    """Exact integer matrix product as float64 (values may round above 2**53)."""
    if exact_in_float64(w, a.shape[1]):
        return a.astype(np.float64) @ b.astype(np.float64)
    return (a @ b).astype(np.float64)


def bfp_matmul(a: RowBlockedMatrix, b: BfpTiledMatrix, stats: dict | None = None) -> np.ndarray:
    """Multiply row-blocked ``a`` by tiled ``b``.

    Each output element is the floating-point sum, in ascending strip order,
    of integer dot products over the inner-dimension strips of ``b``'s tiles.
    If ``stats`` is given it receives the strip count and the number of
    floating-point additions per output element.
    """
    if a.axis != "row":
        raise DimensionError("left operand must be blocked per row")
    if a.cols != b.rows:
        raise DimensionError(f"inner dimensions differ: {a.shape} x {b.shape}")
    if a.width != b.width:
        raise DimensionError(f"widths differ: {a.width} vs {b.width}")
    w = a.width
    tr, tc = b.tile_shape
    inner = min(tr, b.rows)
    check_accumulator(w, inner)
    nstrips = b.grid_shape[0]
    out = None
    adds = 0
    ea = a.exponents[:, None]
    for k in range(nstrips):
        lo, hi = k * tr, min((k + 1) * tr, b.rows)
        acc = _int_product(a.mantissas[:, lo:hi], b.mantissas[lo:hi], w)
        eb = np.repeat(b.exponents[k], tc)[: b.cols][None, :]
        scale = np.maximum(ea + eb - 2 * (w - 1), 2 * E_MIN)
        part = np.ldexp(acc, scale.astype(np.int32))
        if out is None:
            out = part
        else:
            out += part
            adds += 1
    if out is None:
        out = np.zeros((a.rows, b.cols))
    if stats is not None:
        stats["strips"] = nstrips
        stats["fp_adds_per_output"] = adds
    return out


def bfp_outer_product(u: BfpBlock, v: BfpBlock) -> np.ndarray:
    if u.width != v.width:
        raise DimensionError(f"widths differ: {u.width} vs {v.width}")
    w = u.width
    prod = np.outer(u.mantissas, v.mantissas).astype(np.float64)
    return np.ldexp(prod, max(u.exponent + v.exponent - 2 * (w - 1), 2 * E_MIN))


def bfp_outer_sum(a: RowBlockedMatrix, b: RowBlockedMatrix) -> np.ndarray:
    """``sum_i outer(a_i, b_i)`` over row blocks, accumulated in floating point.

    This is ``a.T @ b`` where both operands keep one exponent per row, the
    layout of a weight gradient built from per-input activations and
    per-input output gradients.
    """
    if a.axis != "row" or b.axis != "row":
        raise DimensionError("both operands must be blocked per row")
    if a.rows != b.rows:
        raise DimensionError(f"row counts differ: {a.rows} vs {b.rows}")
    if a.width != b.width:
        raise DimensionError(f"widths differ: {a.width} vs {b.width}")
    if 2 * (a.width - 1) <= 53:
        # every elementwise product of dequantized values is exact
        return a.dequantize().T @ b.dequantize()
    out = np.zeros((a.cols, b.cols))
    for i in range(a.rows):
        out += bfp_outer_product(a.block(i), b.block(i))
    return out


# -- convolution lowering ---------------------------------------------------

@dataclass(frozen=True)
class ConvGeometry:
    kh: int
    kw: int
    stride: int = 1
    padding: int = 0

    def output_size(self, h: int, w: int) -> tuple[int, int]:
        oh = (h + 2 * self.padding - self.kh) // self.stride + 1
        ow = (w + 2 * self.padding - self.kw) // self.stride + 1
        if oh < 1 or ow < 1 or self.stride < 1 or self.padding < 0:
            raise DimensionError(
                f"kernel {self.kh}x{self.kw}, stride {self.stride}, padding {self.padding} "
                f"does not fit a {h}x{w} input"
            )
        return oh, ow


def im2col(x, kernel, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Unroll NCHW patches: one row per (n, oh, ow), one column per (c, kh, kw)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4:
        raise DimensionError(f"expected NCHW input, got shape {x.shape}")
    g = ConvGeometry(*kernel, stride, padding)
    n, c, h, w = x.shape
    oh, ow = g.output_size(h, w)
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    win = sliding_window_view(x, (g.kh, g.kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :oh, :ow]
    # win: (n, c, oh, ow, kh, kw)
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * g.kh * g.kw)


def col2im(cols, x_shape, kernel, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Adjoint of :func:`im2col`: scatter-add patch rows back into NCHW."""
    n, c, h, w = x_shape
    g = ConvGeometry(*kernel, stride, padding)
    oh, ow = g.output_size(h, w)
    cols = np.asarray(cols).reshape(n, oh, ow, c, g.kh, g.kw)
    out = np.zeros((n, c, h + 2 * padding, w + 2 * padding))
    for i in range(g.kh):
        for j in range(g.kw):
            out[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride] += cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    if padding:
        out = out[:, :, padding:-padding, padding:-padding]
    return out


def conv_weight_tile(tile, kh: int, kw: int):
    """Tile shape for an ``(out, in*kh*kw)`` weight matrix that never splits a kernel patch."""
    if tile is UNTILED:
        return UNTILED
    return (int(tile), int(tile) * kh * kw)


def conv2d_bfp(x, weights: BfpTiledMatrix, geometry: ConvGeometry, mode: RoundingMode = NEAREST_EVEN,
               cols_q: RowBlockedMatrix | None = None) -> np.ndarray:
    """BFP convolution via im2col: patches blocked per row times the weight tiles.

    ``weights`` is the ``(out_channels, in_channels*kh*kw)`` matrix. Pass a
    precomputed ``cols_q`` to reuse an already quantized patch matrix.
    """
    x = np.asarray(x, dtype=np.float64)
    n, c, h, w = x.shape
    oh, ow = geometry.output_size(h, w)
    if weights.cols != c * geometry.kh * geometry.kw:
        raise DimensionError(
            f"weight matrix has {weights.cols} columns, expected {c * geometry.kh * geometry.kw}"
        )
    if cols_q is None:
        cols = im2col(x, (geometry.kh, geometry.kw), geometry.stride, geometry.padding)
        cols_q = row_block(cols, "row", weights.width, mode)
    y = bfp_matmul(cols_q, weights.T)
    return y.reshape(n, oh, ow, weights.rows).transpose(0, 3, 1, 2)


def tile_fp_additions(inner: int, tile) -> int:
    """Floating-point additions per output element for a tiled inner dimension."""
    if tile is UNTILED:
        return 0
    return math.ceil(inner / tile) - 1
