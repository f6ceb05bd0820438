"""Minibatch training of a :class:`Network` in FP or HBFP mode."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from hbfp.config import ExperimentConfig
from hbfp.data import Dataset, gen_blobs, gen_spirals, load_idx, synthetic_digits
from hbfp.layers import OptimizerState, sgd_step, shell_update, softmax_xent
from hbfp.model import BfpFormat, ModelSpec, Network, mlp, small_cnn
from hbfp.rounding import NEAREST_EVEN, RoundingMode
from hbfp.xorshift import derive_seed

log = logging.getLogger(__name__)

CSV_HEADER = ("epoch", "train_loss", "val_metric", "seconds", "config_id")


@dataclass(frozen=True)
class MetricsRow:
    epoch: int
    train_loss: float
    val_metric: float
    seconds: float
    config_id: str

    def as_csv(self) -> str:
        return f"{self.epoch},{self.train_loss!r},{self.val_metric!r},{self.seconds:.6f},{self.config_id}"


@dataclass
class TrainResult:
    metrics: list
    network: Network

    @property
    def final_val_metric(self):
        return self.metrics[-1].val_metric if self.metrics else float("nan")


def bfp_format(cfg: ExperimentConfig) -> BfpFormat | None:
    if cfg.mode == "fp32":
        return None
    return BfpFormat(cfg.w_narrow, cfg.w_wide, cfg.tile)


def rounding_mode(cfg: ExperimentConfig) -> RoundingMode:
    if cfg.rounding == "stochastic":
        return RoundingMode.stochastic(derive_seed(cfg.effective_seed, 0x5EED))
    return NEAREST_EVEN


def build_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.dataset == "spirals":
        data = gen_spirals(cfg.n_samples, cfg.classes, cfg.noise, cfg.data_seed, cfg.turns, cfg.val_fraction)
    elif cfg.dataset == "blobs":
        data = gen_blobs(cfg.n_samples, cfg.classes, cfg.dim, cfg.spread, cfg.data_seed, cfg.val_fraction)
    elif cfg.dataset == "digits":
        images, labels = synthetic_digits(cfg.n_samples, cfg.data_seed)
        data = Dataset.from_arrays(images / 255.0, labels, 10, cfg.val_fraction, cfg.data_seed)
    else:
        data = load_idx(cfg.idx_images, cfg.idx_labels, val_fraction=cfg.val_fraction, seed=cfg.data_seed)
    if cfg.limit is not None and cfg.limit < len(data):
        data = data.subset(cfg.limit, cfg.data_seed)
    return data


def dataset_shape(cfg: ExperimentConfig) -> tuple:
    """``(per-sample feature shape, class count)`` without generating the data when possible."""
    if cfg.dataset == "spirals":
        return (2,), cfg.classes
    if cfg.dataset == "blobs":
        return (cfg.dim,), cfg.classes
    if cfg.dataset == "digits":
        return (28, 28), 10
    data = build_dataset(cfg)
    return data.features.shape[1:], data.n_classes


def build_model(cfg: ExperimentConfig, feature_shape, n_classes: int) -> ModelSpec:
    feature_shape = tuple(feature_shape)
    n_in = int(np.prod(feature_shape))
    if cfg.model == "logreg":
        return mlp(n_in, (), n_classes, feature_shape)
    if cfg.model == "mlp":
        return mlp(n_in, cfg.hidden_sizes, n_classes, feature_shape)
    image = feature_shape if len(feature_shape) == 3 else (1, *feature_shape)
    if len(image) != 3:
        raise ValueError(f"the cnn model needs image features, got shape {feature_shape}")
    return small_cnn(image, n_classes)


def accuracy(net: Network, X, y, batch_size=512) -> float:
    if len(y) == 0:
        return float("nan")
    pred = np.argmax(net.predict_proba(X, batch_size), axis=1)
    return float(np.mean(pred == y))


def apply_updates(net: Network, grads: dict, opt: OptimizerState, mode: RoundingMode) -> None:
    """Shell-optimizer step for every parameter layer; layer ``i`` uses ``mode.fork(i, 2)``."""
    lr = opt.current_lr()
    for i, (dw, db) in grads.items():
        net.weights[i] = shell_update(net.weights[i], dw, opt, f"layer{i}.weight", mode.fork(i, 2))
        name = f"layer{i}.bias"
        net.biases[i], opt.buffers[name] = sgd_step(net.biases[i], db, opt.buffers.get(name), lr,
                                                    opt.momentum, 0.0)


def train(model: ModelSpec, data: Dataset, cfg: ExperimentConfig, network: Network | None = None,
          on_epoch=None) -> TrainResult:
    """Train with minibatch SGD and return per-epoch metrics.

    In ``fp32`` mode every BFP conversion is skipped and the same code runs
    in floating point. The validation metric is accuracy on the validation
    split (training split if there is none), evaluated with round-to-nearest.
    """
    seed = cfg.effective_seed
    base = rounding_mode(cfg)
    net = network or Network(model, bfp_format(cfg), seed, base.fork(0))
    X = data.features.reshape((len(data), *model.input_shape))
    y = data.labels
    train_idx, val_idx = data.train_idx, data.val_idx
    if len(val_idx) == 0:
        val_idx = train_idx
    n_batches = -(-len(train_idx) // cfg.batch_size)
    opt = OptimizerState(cfg.lr, cfg.momentum, cfg.weight_decay, cfg.lr_schedule, cfg.epochs * n_batches)
    shuffle = np.random.default_rng(derive_seed(seed, 1))
    metrics = []
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        order = shuffle.permutation(train_idx)
        total = 0.0
        for b in range(n_batches):
            idx = order[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            mode = base.fork(1, opt.step)
            logits, caches = net.forward(X[idx], mode)
            loss, dlogits = softmax_xent(logits, y[idx])
            grads = net.backward(dlogits, caches, mode)
            apply_updates(net, grads, opt, mode)
            opt.step += 1
            total += loss * len(idx)
        row = MetricsRow(epoch, total / len(train_idx), accuracy(net, X[val_idx], y[val_idx]),
                         time.perf_counter() - t0, cfg.config_id)
        log.info("%s epoch %d loss %.5f val %.4f (%.2fs)", row.config_id, epoch, row.train_loss,
                 row.val_metric, row.seconds)
        metrics.append(row)
        if on_epoch is not None:
            on_epoch(row)
    return TrainResult(metrics, net)


def run_config(cfg: ExperimentConfig, on_epoch=None) -> TrainResult:
    data = build_dataset(cfg)
    return train(build_model(cfg, data.features.shape[1:], data.n_classes), data, cfg, on_epoch=on_epoch)
