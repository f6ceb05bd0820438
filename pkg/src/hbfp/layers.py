"""Layer operations for hybrid BFP/FP training.

Dense and convolution layers run their forward, input-gradient and
weight-gradient dot products in BFP when given :class:`DualWidthWeights`,
and in plain floating point when given an ``ndarray``. Activations, the
loss and optimizer arithmetic are floating point only.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hbfp.bfp import DimensionError
from hbfp.linalg import (
    BfpTiledMatrix,
    ConvGeometry,
    bfp_matmul,
    bfp_outer_sum,
    col2im,
    conv2d_bfp,
    im2col,
    row_block,
    tile_matrix,
)
from hbfp.rounding import NEAREST_EVEN, RoundingMode


@dataclass(frozen=True, eq=False)
class DualWidthWeights:
    """Wide master copy for updates, narrow compute copy for dot products.

    ``compute`` is always derived from ``master``, never updated on its own.
    """

    master: BfpTiledMatrix
    compute: BfpTiledMatrix

    def __post_init__(self):
        if self.master.width < self.compute.width:
            raise ValueError(
                f"master width {self.master.width} is narrower than compute width {self.compute.width}"
            )
        if self.master.shape != self.compute.shape or self.master.tile_shape != self.compute.tile_shape:
            raise DimensionError("master and compute copies must share shape and tiling")

    @classmethod
    def from_master(cls, master: BfpTiledMatrix, w_narrow: int, mode: RoundingMode = NEAREST_EVEN):
        return cls(master, tile_matrix(master.dequantize(), master.tile_shape, w_narrow, mode))

    @classmethod
    def from_float(cls, w, w_narrow: int, w_wide: int, tile, mode: RoundingMode = NEAREST_EVEN):
        """Quantize FP weights to the master width, then derive the compute copy.

        Stochastic streams: ``mode.fork(0)`` for the master, ``mode.fork(1)``
        for the compute copy.
        """
        master = tile_matrix(w, tile, w_wide, mode.fork(0))
        return cls.from_master(master, w_narrow, mode.fork(1))

    @property
    def shape(self):
        return self.master.shape

    @property
    def w_narrow(self):
        return self.compute.width

    @property
    def w_wide(self):
        return self.master.width

    def dequantize(self) -> np.ndarray:
        """Master values, the ones the optimizer sees."""
        return self.master.dequantize()


def _weight_shape(weights):
    return weights.shape


# -- dense ------------------------------------------------------------------

def dense_forward(x, weights, mode: RoundingMode = NEAREST_EVEN):
    """``y = x @ W`` with ``W`` laid out ``(in, out)``.

    In BFP the activation gets one exponent per training input; the cache
    holds that quantized activation for the weight gradient.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != _weight_shape(weights)[0]:
        raise DimensionError(f"input {x.shape} does not match weights {_weight_shape(weights)}")
    if isinstance(weights, DualWidthWeights):
        xq = row_block(x, "row", weights.w_narrow, mode)
        return bfp_matmul(xq, weights.compute), xq
    return x @ weights, x


def dense_backward(dy, cache, weights, mode: RoundingMode = NEAREST_EVEN):
    """Return ``(dx, dW)``. ``dy`` is quantized once and reused for both products."""
    dy = np.asarray(dy, dtype=np.float64)
    if dy.ndim != 2 or dy.shape[1] != _weight_shape(weights)[1]:
        raise DimensionError(f"gradient {dy.shape} does not match weights {_weight_shape(weights)}")
    if isinstance(weights, DualWidthWeights):
        dyq = row_block(dy, "row", weights.w_narrow, mode)
        dx = bfp_matmul(dyq, weights.compute.T)
        dw = bfp_outer_sum(cache, dyq)
        return dx, dw
    return dy @ weights.T, cache.T @ dy


# -- convolution ------------------------------------------------------------

def conv_forward(x, weights, geometry: ConvGeometry, mode: RoundingMode = NEAREST_EVEN):
    """NCHW convolution with weights laid out ``(out, in*kh*kw)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4:
        raise DimensionError(f"expected NCHW input, got {x.shape}")
    kernel = (geometry.kh, geometry.kw)
    out_ch, k = _weight_shape(weights)
    if k != x.shape[1] * geometry.kh * geometry.kw:
        raise DimensionError(f"input channels {x.shape[1]} do not match weights {_weight_shape(weights)}")
    cols = im2col(x, kernel, geometry.stride, geometry.padding)
    if isinstance(weights, DualWidthWeights):
        cols_q = row_block(cols, "row", weights.w_narrow, mode)
        y = conv2d_bfp(x, weights.compute, geometry, cols_q=cols_q)
        return y, (cols_q, x.shape)
    n = x.shape[0]
    oh, ow = geometry.output_size(*x.shape[2:])
    y = (cols @ weights.T).reshape(n, oh, ow, out_ch).transpose(0, 3, 1, 2)
    return y, (cols, x.shape)


def conv_backward(dy, cache, weights, geometry: ConvGeometry, mode: RoundingMode = NEAREST_EVEN):
    cols, x_shape = cache
    dy = np.asarray(dy, dtype=np.float64)
    out_ch = _weight_shape(weights)[0]
    if dy.ndim != 4 or dy.shape[1] != out_ch:
        raise DimensionError(f"gradient {dy.shape} does not match weights {_weight_shape(weights)}")
    dy_mat = dy.transpose(0, 2, 3, 1).reshape(-1, out_ch)
    if isinstance(weights, DualWidthWeights):
        dyq = row_block(dy_mat, "row", weights.w_narrow, mode)
        dcols = bfp_matmul(dyq, weights.compute)
        dw = bfp_outer_sum(dyq, cols)
    else:
        dcols = dy_mat @ weights
        dw = dy_mat.T @ cols
    dx = col2im(dcols, x_shape, (geometry.kh, geometry.kw), geometry.stride, geometry.padding)
    return dx, dw


# -- floating-point only ----------------------------------------------------

def relu_forward(x):
    x = np.asarray(x, dtype=np.float64)
    mask = x > 0
    return x * mask, mask


def relu_backward(dy, mask):
    return dy * mask


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_xent(logits, labels):
    """Mean softmax cross-entropy and its gradient with respect to the logits."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    n, c = logits.shape
    if labels.shape != (n,):
        raise DimensionError(f"expected {n} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= c):
        raise ValueError(f"labels must lie in [0, {c}), got range [{labels.min()}, {labels.max()}]")
    z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(logsum - z[rows, labels]))
    d = np.exp(z - logsum[:, None])
    d[rows, labels] -= 1.0
    return loss, d / n


# -- optimizer --------------------------------------------------------------

@dataclass
class OptimizerState:
    """SGD with momentum and L2 weight decay; momentum buffers stay in FP."""

    lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 0.0
    schedule: str = "constant"
    total_steps: int = 0
    step: int = 0
    buffers: dict = field(default_factory=dict)

    def current_lr(self) -> float:
        if self.schedule == "constant" or self.total_steps <= 0:
            return self.lr
        if self.schedule == "cosine":
            t = min(self.step / self.total_steps, 1.0)
            return 0.5 * self.lr * (1.0 + np.cos(np.pi * t))
        raise ValueError(f"unknown learning-rate schedule {self.schedule!r}")


def sgd_step(param, grad, buf, lr, momentum, weight_decay):
    """One momentum-SGD update in floating point; returns ``(param, buf)``."""
    g = grad + weight_decay * param if weight_decay else grad
    buf = momentum * buf + g if buf is not None else g.copy()
    return param - lr * buf, buf


class NonFiniteGradientError(FloatingPointError):
    pass


def shell_update(weights, dw, opt: OptimizerState, name: str, mode: RoundingMode = NEAREST_EVEN):
    """Apply the optimizer to the FP view of ``weights`` and requantize.

    For :class:`DualWidthWeights` the master is dequantized, updated in FP,
    then requantized at the wide width (stream ``mode.fork(0)``) and the
    compute copy rederived at the narrow width (``mode.fork(1)``), both with
    the same tiling. Plain arrays are updated in place of a copy.
    """
    dw = np.asarray(dw, dtype=np.float64)
    if dw.shape != _weight_shape(weights):
        raise DimensionError(f"{name}: gradient {dw.shape} does not match weights {_weight_shape(weights)}")
    if not np.all(np.isfinite(dw)):
        raise NonFiniteGradientError(f"non-finite gradient in layer {name}")
    is_bfp = isinstance(weights, DualWidthWeights)
    w = weights.dequantize() if is_bfp else weights
    new, opt.buffers[name] = sgd_step(w, dw, opt.buffers.get(name), opt.current_lr(), opt.momentum,
                                      opt.weight_decay)
    if not is_bfp:
        return new
    master = tile_matrix(new, weights.master.tile_shape, weights.w_wide, mode.fork(0))
    return DualWidthWeights.from_master(master, weights.w_narrow, mode.fork(1))
