import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.linear_model import LogisticRegression
from sklearn.pipeline import make_pipeline

from hbfp.data import gen_blobs, gen_spirals
from hbfp.estimator import BFPQuantizer, HBFPClassifier
from hbfp.linalg import row_block, tile_matrix


def test_params_and_clone():
    clf = HBFPClassifier(w_narrow=4, tile=None, epochs=3)
    params = clf.get_params()
    assert params["w_narrow"] == 4 and params["tile"] is None
    twin = clone(clf).set_params(w_narrow=12)
    assert twin.w_narrow == 12 and clf.w_narrow == 4


def test_fit_predict_on_string_labels():
    d = gen_blobs(300, 3, 2, spread=0.4, seed=0)
    names = np.array(["ant", "bee", "cat"])[d.labels]
    clf = HBFPClassifier(hidden=(16,), epochs=15, lr=0.05).fit(d.features, names)
    assert set(clf.classes_) == {"ant", "bee", "cat"}
    assert clf.n_features_in_ == 2 and len(clf.history_) == 15
    proba = clf.predict_proba(d.features)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    assert clf.score(d.features, names) > 0.95


def test_fp32_and_hbfp_reach_similar_accuracy():
    d = gen_spirals(600, 3, 0.05, seed=1, val_fraction=0.0)
    scores = {}
    for mode in ("fp32", "hbfp"):
        clf = HBFPClassifier(mode=mode, hidden=(32, 32), epochs=30, lr=0.05, random_state=0)
        scores[mode] = clf.fit(d.features, d.labels).score(d.features, d.labels)
    assert abs(scores["fp32"] - scores["hbfp"]) < 0.1


def test_unfitted_raises():
    with pytest.raises(NotFittedError):
        HBFPClassifier().predict(np.zeros((2, 2)))


def test_quantizer_matches_library_calls(rng):
    X = rng.standard_normal((10, 6)) * 10.0 ** rng.integers(-3, 3, (10, 1))
    np.testing.assert_array_equal(BFPQuantizer(width=6).fit_transform(X), row_block(X, "row", 6).dequantize())
    np.testing.assert_array_equal(BFPQuantizer(width=6, blocking="col").fit_transform(X),
                                  row_block(X, "col", 6).dequantize())
    np.testing.assert_array_equal(BFPQuantizer(width=6, blocking="tile", tile=4).fit_transform(X),
                                  tile_matrix(X, 4, 6).dequantize())
    q = BFPQuantizer(width=4, rounding="stochastic", random_state=3).fit(X)
    np.testing.assert_array_equal(q.transform(X), q.transform(X))
    with pytest.raises(ValueError):
        q.transform(X[:, :3])


def test_quantizer_in_pipeline():
    d = gen_blobs(400, 2, 4, spread=0.5, seed=2)
    pipe = make_pipeline(BFPQuantizer(width=8), LogisticRegression())
    assert pipe.fit(d.X_train, d.y_train).score(d.X_val, d.y_val) > 0.95
