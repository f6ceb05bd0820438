import numpy as np

from hbfp.config import ExperimentConfig
from hbfp.layers import DualWidthWeights
from hbfp.training import accuracy, build_dataset, build_model, run_config, train


def train_accuracy(cfg, result):
    data = build_dataset(cfg)
    X = data.X_train.reshape((-1, *result.network.spec.input_shape))
    return accuracy(result.network, X, data.y_train)


def test_fp32_logistic_regression_separates_blobs():
    cfg = ExperimentConfig(mode="fp32", model="logreg", dataset="blobs", n_samples=600, classes=3, dim=2,
                           spread=0.5, epochs=50, lr=0.05)
    result = run_config(cfg)
    assert len(result.metrics) == 50
    assert train_accuracy(cfg, result) >= 0.99


def test_near_lossless_width_tracks_fp32():
    base = ExperimentConfig(dataset="spirals", n_samples=600, hidden="32,32", epochs=5, rounding="nearest",
                            w_narrow=24, w_wide=32, lr=0.05)
    fp = run_config(base.replace(mode="fp32"))
    hb = run_config(base.replace(mode="hbfp"))
    for a, b in zip(fp.metrics, hb.metrics):
        assert abs(a.train_loss - b.train_loss) <= 1e-3
    assert [m.epoch for m in hb.metrics] == [1, 2, 3, 4, 5]
    assert all(isinstance(w, DualWidthWeights) for w in hb.network.weights.values())


def test_zero_epochs_returns_initial_network():
    cfg = ExperimentConfig(epochs=0, n_samples=100)
    data = build_dataset(cfg)
    model = build_model(cfg, data.features.shape[1:], data.n_classes)
    result = train(model, data, cfg)
    assert result.metrics == []
    again = train(model, data, cfg)
    for i in result.network.weights:
        assert result.network.weights[i].master.equals(again.network.weights[i].master)
    assert np.isnan(result.final_val_metric)


def test_fp_mlp_learns_spirals():
    # well inside the 200-epoch budget
    cfg = ExperimentConfig(mode="fp32", dataset="spirals", n_samples=2000, classes=3, noise=0.05,
                           hidden="64,64", epochs=60, lr=0.05, lr_schedule="cosine")
    seen = []
    result = run_config(cfg, on_epoch=seen.append)
    assert [r.epoch for r in seen] == list(range(1, 61))
    assert train_accuracy(cfg, result) > 0.90


def test_training_is_reproducible():
    cfg = ExperimentConfig(n_samples=200, epochs=2, hidden="8")
    a, b = run_config(cfg), run_config(cfg)
    assert [(m.train_loss, m.val_metric) for m in a.metrics] == [(m.train_loss, m.val_metric) for m in b.metrics]
    c = run_config(cfg.replace(seed=1))
    assert a.metrics[-1].train_loss != c.metrics[-1].train_loss


def test_cnn_trains_on_digits():
    cfg = ExperimentConfig(model="cnn", dataset="digits", n_samples=300, epochs=1, batch_size=32, lr=0.05)
    result = run_config(cfg)
    assert result.network.spec.input_shape == (1, 28, 28)
    assert np.isfinite(result.metrics[0].train_loss)
