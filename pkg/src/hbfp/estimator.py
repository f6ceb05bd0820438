"""scikit-learn estimators over the HBFP trainer and the BFP quantizer."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from hbfp.config import ExperimentConfig
from hbfp.data import Dataset
from hbfp.linalg import UNTILED, row_block, tile_matrix
from hbfp.rounding import NEAREST_EVEN, RoundingMode
from hbfp.training import build_model, train


class HBFPClassifier(ClassifierMixin, BaseEstimator):
    """Neural-network classifier trained with hybrid BFP/FP arithmetic.

    ``mode="fp32"`` trains the same network entirely in floating point.
    ``w_narrow`` is the mantissa width used by every dot product and
    ``w_wide`` the width of the stored master weights; weight exponents are
    shared per ``tile`` x ``tile`` block (``None`` for one per matrix).
    Inputs may be flat feature vectors or images ``(n, h, w)`` /
    ``(n, c, h, w)`` for ``model="cnn"``.
    """

    def __init__(self, model="mlp", hidden=(64, 64), mode="hbfp", w_narrow=8, w_wide=16, tile=24,
                 rounding="stochastic", epochs=10, batch_size=32, lr=0.1, momentum=0.9,
                 weight_decay=0.0, lr_schedule="constant", validation_fraction=0.0, random_state=0):
        self.model = model
        self.hidden = hidden
        self.mode = mode
        self.w_narrow = w_narrow
        self.w_wide = w_wide
        self.tile = tile
        self.rounding = rounding
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.lr_schedule = lr_schedule
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def _config(self) -> ExperimentConfig:
        return ExperimentConfig(
            mode=self.mode, w_narrow=self.w_narrow, w_wide=self.w_wide, tile=self.tile,
            rounding=self.rounding, seed=int(self.random_state or 0), model=self.model,
            hidden=",".join(str(h) for h in self.hidden), epochs=self.epochs, batch_size=self.batch_size,
            lr=self.lr, momentum=self.momentum, weight_decay=self.weight_decay,
            lr_schedule=self.lr_schedule, val_fraction=self.validation_fraction,
        )

    def fit(self, X, y):
        X, y = check_X_y(X, y, allow_nd=True)
        cfg = self._config()
        self.classes_, y_enc = np.unique(y, return_inverse=True)
        data = Dataset.from_arrays(X, y_enc, len(self.classes_), self.validation_fraction, cfg.seed)
        spec = build_model(cfg, X.shape[1:], len(self.classes_))
        result = train(spec, data, cfg)
        self.network_ = result.network
        self.history_ = result.metrics
        self.n_features_in_ = int(np.prod(X.shape[1:]))
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "network_")
        X = check_array(X, allow_nd=True)
        return self.network_.predict_proba(X)

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]


class BFPQuantizer(TransformerMixin, BaseEstimator):
    """Round-trip a matrix through BFP and return the representable values.

    ``blocking="row"`` shares one exponent per sample, ``"col"`` one per
    feature, ``"tile"`` one per ``tile`` x ``tile`` block (``tile=None`` for
    a single exponent). Stateless: ``fit`` only validates.
    """

    def __init__(self, width=8, blocking="row", tile=24, rounding="nearest", random_state=1):
        self.width = width
        self.blocking = blocking
        self.tile = tile
        self.rounding = rounding
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X)
        self.n_features_in_ = X.shape[1]
        return self

    def _mode(self):
        if self.rounding == "stochastic":
            return RoundingMode.stochastic(int(self.random_state))
        return NEAREST_EVEN

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        if self.blocking == "tile":
            tile = UNTILED if self.tile is None else self.tile
            return tile_matrix(X, tile, self.width, self._mode()).dequantize()
        return row_block(X, self.blocking, self.width, self._mode()).dequantize()
