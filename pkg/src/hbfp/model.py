"""Small sequential models: layer specs, shape checking, parameters."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hbfp.layers import (
    DualWidthWeights,
    conv_backward,
    conv_forward,
    dense_backward,
    dense_forward,
    relu_backward,
    relu_forward,
    softmax,
)
from hbfp.linalg import UNTILED, ConvGeometry, conv_weight_tile
from hbfp.rounding import NEAREST_EVEN, RoundingMode


@dataclass(frozen=True)
class Dense:
    n_in: int
    n_out: int


@dataclass(frozen=True)
class Conv2d:
    in_ch: int
    out_ch: int
    kh: int
    kw: int
    stride: int = 1
    pad: int = 0

    @property
    def geometry(self):
        return ConvGeometry(self.kh, self.kw, self.stride, self.pad)


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class BfpFormat:
    """HBFP knobs: narrow compute width, wide storage width, weight tile size."""

    w_narrow: int = 8
    w_wide: int = 16
    tile: object = 24

    def __post_init__(self):
        if self.w_wide < self.w_narrow:
            raise ValueError(f"w_wide ({self.w_wide}) must be >= w_narrow ({self.w_narrow})")

    @property
    def name(self):
        t = "U" if self.tile is UNTILED else self.tile
        return f"hbfp{self.w_narrow}_{self.w_wide}_t{t}"


class ModelSpec:
    """Ordered layers with a fixed per-sample input shape; loss is softmax cross-entropy."""

    def __init__(self, layers, input_shape):
        self.layers = tuple(layers)
        self.input_shape = tuple(int(d) for d in input_shape)
        self.shapes = self._infer_shapes()

    def _infer_shapes(self):
        shape = self.input_shape
        shapes = [shape]
        for i, layer in enumerate(self.layers):
            if isinstance(layer, Dense):
                if shape != (layer.n_in,):
                    raise ValueError(f"layer {i} Dense expects ({layer.n_in},), got {shape}")
                shape = (layer.n_out,)
            elif isinstance(layer, Conv2d):
                if len(shape) != 3 or shape[0] != layer.in_ch:
                    raise ValueError(f"layer {i} Conv2d expects ({layer.in_ch}, H, W), got {shape}")
                oh, ow = layer.geometry.output_size(shape[1], shape[2])
                shape = (layer.out_ch, oh, ow)
            elif isinstance(layer, Flatten):
                shape = (int(np.prod(shape)),)
            elif not isinstance(layer, ReLU):
                raise TypeError(f"unknown layer {layer!r}")
            shapes.append(shape)
        return shapes

    @property
    def output_shape(self):
        return self.shapes[-1]

    def __repr__(self):
        return f"ModelSpec({list(self.layers)!r}, input_shape={self.input_shape})"


def mlp(n_in, hidden, n_classes, input_shape=None) -> ModelSpec:
    layers = []
    if input_shape is not None and len(input_shape) > 1:
        layers.append(Flatten())
    sizes = [n_in, *hidden]
    for a, b in zip(sizes[:-1], sizes[1:]):
        layers += [Dense(a, b), ReLU()]
    layers.append(Dense(sizes[-1], n_classes))
    return ModelSpec(layers, input_shape or (n_in,))


def small_cnn(input_shape, n_classes, channels=(8, 16)) -> ModelSpec:
    """Two stride-2 3x3 convolutions and a dense classifier."""
    c, h, w = input_shape
    layers = []
    for out in channels:
        layers += [Conv2d(c, out, 3, 3, stride=2, pad=1), ReLU()]
        c = out
    spec = ModelSpec(layers + [Flatten()], input_shape)
    flat = spec.output_shape[0]
    return ModelSpec(layers + [Flatten(), Dense(flat, n_classes)], input_shape)


def _fan_in(layer):
    if isinstance(layer, Dense):
        return layer.n_in
    return layer.in_ch * layer.kh * layer.kw


def weight_shape(layer):
    if isinstance(layer, Dense):
        return (layer.n_in, layer.n_out)
    return (layer.out_ch, layer.in_ch * layer.kh * layer.kw)


def _n_out(layer):
    return layer.n_out if isinstance(layer, Dense) else layer.out_ch


def weight_tile(layer, tile):
    """Tile for a layer's weight matrix; convolutions tile channel pairs."""
    if isinstance(layer, Conv2d):
        return conv_weight_tile(tile, layer.kh, layer.kw)
    return tile


class Network:
    """Parameters and forward/backward passes for a :class:`ModelSpec`.

    ``fmt=None`` runs everything in floating point; otherwise weights are
    :class:`DualWidthWeights` and dot products run in BFP.
    """

    def __init__(self, spec: ModelSpec, fmt: BfpFormat | None = None, seed: int = 0,
                 mode: RoundingMode = NEAREST_EVEN):
        self.spec = spec
        self.fmt = fmt
        rng = np.random.default_rng(seed)
        self.weights = {}
        self.biases = {}
        for i, layer in enumerate(spec.layers):
            if not isinstance(layer, (Dense, Conv2d)):
                continue
            bound = np.sqrt(6.0 / _fan_in(layer))
            w = rng.uniform(-bound, bound, size=weight_shape(layer))
            if fmt is not None:
                w = DualWidthWeights.from_float(w, fmt.w_narrow, fmt.w_wide, weight_tile(layer, fmt.tile),
                                                mode.fork(i))
            self.weights[i] = w
            self.biases[i] = np.zeros(_n_out(layer))

    @property
    def is_bfp(self):
        return self.fmt is not None

    def weight_values(self, i):
        w = self.weights[i]
        return w.dequantize() if isinstance(w, DualWidthWeights) else w

    def forward(self, x, mode: RoundingMode = NEAREST_EVEN):
        """Return ``(logits, caches)``; layer ``i`` converts with ``mode.fork(i, 0)``."""
        x = np.asarray(x, dtype=np.float64).reshape((-1, *self.spec.input_shape))
        caches = []
        for i, layer in enumerate(self.spec.layers):
            if isinstance(layer, Dense):
                x, c = dense_forward(x, self.weights[i], mode.fork(i, 0))
                x = x + self.biases[i]
            elif isinstance(layer, Conv2d):
                x, c = conv_forward(x, self.weights[i], layer.geometry, mode.fork(i, 0))
                x = x + self.biases[i][None, :, None, None]
            elif isinstance(layer, ReLU):
                x, c = relu_forward(x)
            else:
                c = x.shape
                x = x.reshape(x.shape[0], -1)
            caches.append(c)
        return x, caches

    def backward(self, dy, caches, mode: RoundingMode = NEAREST_EVEN):
        """Return ``{layer index: (dW, db)}``; layer ``i`` converts with ``mode.fork(i, 1)``."""
        grads = {}
        for i in reversed(range(len(self.spec.layers))):
            layer, c = self.spec.layers[i], caches[i]
            if isinstance(layer, Dense):
                db = dy.sum(axis=0)
                dy, dw = dense_backward(dy, c, self.weights[i], mode.fork(i, 1))
                grads[i] = (dw, db)
            elif isinstance(layer, Conv2d):
                db = dy.sum(axis=(0, 2, 3))
                dy, dw = conv_backward(dy, c, self.weights[i], layer.geometry, mode.fork(i, 1))
                grads[i] = (dw, db)
            elif isinstance(layer, ReLU):
                dy = relu_backward(dy, c)
            else:
                dy = dy.reshape(c)
        return grads

    def predict_proba(self, x, batch_size=512):
        x = np.asarray(x, dtype=np.float64)
        out = [softmax(self.forward(x[i:i + batch_size])[0]) for i in range(0, len(x), batch_size)]
        return np.concatenate(out) if out else np.zeros((0, self.spec.output_shape[0]))
