"""Deterministic datasets: Gaussian blobs, spirals, and IDX image files."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage
from sklearn.datasets import load_digits

IDX_UBYTE = 0x08
IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    train_idx: np.ndarray
    val_idx: np.ndarray
    n_classes: int

    def __post_init__(self):
        n = len(self.features)
        if len(self.labels) != n:
            raise ValueError(f"{n} samples but {len(self.labels)} labels")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError(f"labels must lie in [0, {self.n_classes})")
        both = np.concatenate([self.train_idx, self.val_idx])
        if len(both) != n or not np.array_equal(np.sort(both), np.arange(n)):
            raise ValueError("train and validation splits must be disjoint and cover the dataset")

    def __len__(self):
        return len(self.features)

    @property
    def X_train(self):
        return self.features[self.train_idx]

    @property
    def y_train(self):
        return self.labels[self.train_idx]

    @property
    def X_val(self):
        return self.features[self.val_idx]

    @property
    def y_val(self):
        return self.labels[self.val_idx]

    @classmethod
    def from_arrays(cls, features, labels, n_classes=None, val_fraction=0.2, seed=0):
        """Wrap arrays and split off a seeded random validation fraction."""
        features = np.asarray(features, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        n = len(features)
        if n_classes is None:
            n_classes = int(labels.max()) + 1 if n else 0
        n_val = int(round(val_fraction * n))
        perm = np.random.default_rng(seed).permutation(n)
        return cls(features, labels, np.sort(perm[n_val:]), np.sort(perm[:n_val]), n_classes)

    def subset(self, n: int, seed: int = 0) -> "Dataset":
        """First ``n`` samples of a seeded shuffle, re-split with the same validation fraction."""
        frac = len(self.val_idx) / max(len(self), 1)
        idx = np.sort(np.random.default_rng(seed).permutation(len(self))[:n])
        return Dataset.from_arrays(self.features[idx], self.labels[idx], self.n_classes, frac, seed)


def gen_blobs(n, classes, dim=2, spread=1.0, seed=0, val_fraction=0.2) -> Dataset:
    """Isotropic Gaussian clusters, labels assigned round-robin.

    Centers are evenly spaced on a circle of radius 5 in the first two
    coordinates (further coordinates are zero), so they do not depend on
    the seed.
    """
    if not n >= classes >= 2 or dim < 1 or spread < 0:
        raise ValueError(f"invalid blob parameters n={n}, classes={classes}, dim={dim}, spread={spread}")
    angles = 2 * np.pi * np.arange(classes) / classes
    centers = np.zeros((classes, dim))
    centers[:, 0] = 5 * np.cos(angles)
    if dim > 1:
        centers[:, 1] = 5 * np.sin(angles)
    elif classes > 2:
        centers[:, 0] = 5 * np.arange(classes)
    labels = np.arange(n) % classes
    rng = np.random.default_rng(seed)
    X = centers[labels] + spread * rng.standard_normal((n, dim))
    return Dataset.from_arrays(X, labels, classes, val_fraction, seed)


def gen_spirals(n, classes=3, noise=0.05, seed=0, turns=1.0, val_fraction=0.2) -> Dataset:
    """Interleaved 2-D spiral arms.

    Arm ``k`` is ``r * (cos t, sin t)`` with ``t = 2*pi*(k/classes + turns*r)``
    and radius ``r`` uniform in [0, 1]; Gaussian noise of std ``noise`` is
    added to the coordinates.
    """
    if not n >= classes >= 2 or noise < 0:
        raise ValueError(f"invalid spiral parameters n={n}, classes={classes}, noise={noise}")
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % classes
    r = rng.uniform(0.0, 1.0, n)
    t = 2 * np.pi * (labels / classes + turns * r)
    X = np.stack([r * np.cos(t), r * np.sin(t)], axis=1)
    X = X + noise * rng.standard_normal((n, 2))
    return Dataset.from_arrays(X, labels, classes, val_fraction, seed)


# -- IDX --------------------------------------------------------------------

def _read_idx(path, expected_magic, what):
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise IdxFormatError(f"{what} file {path} is truncated (no header)")
    magic, = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise IdxFormatError(f"bad magic 0x{magic:08x} in {what} file {path}, expected 0x{expected_magic:08x}")
    ndim = magic & 0xFF
    head = 4 + 4 * ndim
    if len(raw) < head:
        raise IdxFormatError(f"{what} file {path} is truncated (incomplete dimensions)")
    dims = struct.unpack(f">{ndim}I", raw[4:head])
    size = int(np.prod(dims))
    if len(raw) - head < size:
        raise IdxFormatError(f"{what} file {path} is truncated: {len(raw) - head} of {size} data bytes")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=head).reshape(dims)


def write_idx(path, array) -> None:
    """Write an unsigned-byte array in IDX format."""
    a = np.asarray(array)
    if a.dtype != np.uint8:
        raise ValueError(f"IDX writer only supports uint8 data, got {a.dtype}")
    header = struct.pack(">I", (IDX_UBYTE << 8) | a.ndim) + struct.pack(f">{a.ndim}I", *a.shape)
    Path(path).write_bytes(header + a.tobytes())


def load_idx(images_path, labels_path, n_classes=None, val_fraction=0.2, seed=0) -> Dataset:
    """Load an IDX image/label pair; pixels are scaled to [0, 1]."""
    images = _read_idx(images_path, IMAGES_MAGIC, "image")
    labels = _read_idx(labels_path, LABELS_MAGIC, "label")
    if len(images) != len(labels):
        raise IdxFormatError(f"{len(images)} images but {len(labels)} labels")
    return Dataset.from_arrays(images / 255.0, labels.astype(np.int64), n_classes, val_fraction, seed)


def synthetic_digits(n, seed=0, size=28):
    """MNIST-shaped digit images built from scikit-learn's 8x8 handwritten digits.

    Each sample is a random 8x8 digit upsampled to ``size`` x ``size`` with
    a random rotation, scale and shift, plus pixel noise. Returns
    ``(images uint8 (n, size, size), labels uint8 (n,))``.
    """
    digits = load_digits()
    rng = np.random.default_rng(seed)
    pick = rng.integers(0, len(digits.images), n)
    base = digits.images / 16.0
    out = np.empty((n, size, size), dtype=np.uint8)
    inner = size - 8
    for k, j in enumerate(pick):
        img = ndimage.zoom(base[j], inner / 8, order=1)
        img = ndimage.rotate(img, rng.uniform(-15, 15), reshape=False, order=1)
        canvas = np.zeros((size, size))
        canvas[4:4 + inner, 4:4 + inner] = img
        canvas = ndimage.shift(canvas, rng.uniform(-2, 2, 2), order=1)
        canvas = np.clip(canvas + 0.05 * rng.standard_normal(canvas.shape), 0, 1)
        out[k] = np.round(canvas * 255).astype(np.uint8)
    return out, digits.target[pick].astype(np.uint8)
