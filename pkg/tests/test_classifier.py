import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hierloc import classifier
from hierloc.classifier import ModelError, SoftmaxModel, TrainConfig

from .oracles import cross_entropy_scalar, numeric_grad, rel_error

ROOMS9 = tuple(f"r{k}" for k in range(9))


def zero_model(R=9, m=4):
    return SoftmaxModel(np.zeros((R, m)), np.zeros(R), tuple(f"r{k}" for k in range(R)))


def test_config_defaults_and_checks():
    cfg = TrainConfig()
    assert (cfg.batch_size, cfg.epochs, cfg.learning_rate, cfg.momentum) == (16, 30, 1e-3, 0.9)
    for bad in ({"batch_size": 0}, {"epochs": 0}, {"momentum": 1.0}, {"learning_rate": -1}):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


def test_forward_uniform_and_dominant():
    m = zero_model()
    assert np.allclose(classifier.forward(m, np.ones(4)), 1 / 9)
    assert classifier.predict_room(m, np.ones(4))[0] == "r0"
    b = np.zeros(9)
    b[0] = 10
    p = classifier.forward(SoftmaxModel(np.zeros((9, 4)), b, ROOMS9), np.ones(4))
    assert p[0] > 0.99
    b[0], b[5] = 0, 3
    assert classifier.predict_room(SoftmaxModel(np.zeros((9, 4)), b, ROOMS9), np.ones(4))[0] == "r5"


def test_forward_dim_mismatch():
    with pytest.raises(ModelError):
        classifier.forward(zero_model(m=4), np.ones(5))


@settings(max_examples=200)
@given(arrays(np.float64, st.integers(1, 12), elements=st.floats(-1e4, 1e4)))
def test_softmax_on_simplex(z):
    p = classifier.softmax(z)
    assert np.all(np.isfinite(p)) and np.all(p >= 0)
    assert abs(p.sum() - 1) <= 1e-6


@settings(max_examples=100)
@given(arrays(np.float64, 6, elements=st.floats(-100, 100)), st.floats(-1e3, 1e3))
def test_argmax_shift_invariant(z, c):
    assert np.argmax(classifier.softmax(z)) == np.argmax(classifier.softmax(z + c))


def test_cross_entropy_values():
    uniform = np.full((3, 9), 1 / 9)
    targets = classifier.one_hot([0, 4, 8], 9)
    assert classifier.cross_entropy(uniform, targets) == pytest.approx(2.19722, abs=1e-5)
    assert classifier.cross_entropy(uniform, targets) == pytest.approx(math.log(9))
    assert classifier.cross_entropy(targets, targets) == 0.0
    zero = classifier.cross_entropy(np.array([[0.0, 1.0]]), np.array([[1.0, 0.0]]))
    assert math.isfinite(zero) and zero == pytest.approx(-math.log(1e-12))
    with pytest.raises(ValueError):
        classifier.cross_entropy(uniform, targets[:2])


def test_loss_matches_scalar_oracle(rng):
    W, b = rng.standard_normal((4, 6)), rng.standard_normal(4)
    X, y = rng.standard_normal((7, 6)), rng.integers(0, 4, 7)
    loss, _, _ = classifier.loss_and_grad(W, b, X, classifier.one_hot(y, 4))
    assert loss == pytest.approx(cross_entropy_scalar(W, b, X, y.tolist()), rel=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_gradient_check(seed):
    rng = np.random.default_rng(seed)
    W, b = rng.standard_normal((3, 5)), rng.standard_normal(3)
    X, y = rng.standard_normal((4, 5)), classifier.one_hot(rng.integers(0, 3, 4), 3)
    _, gW, gb = classifier.loss_and_grad(W, b, X, y)
    f = lambda: classifier.loss_and_grad(W, b, X, y)[0]  # noqa: E731
    assert rel_error(gW, numeric_grad(f, W)) <= 1e-4
    assert rel_error(gb, numeric_grad(f, b)) <= 1e-4


def blobs(rng, n=100, sep=4.0):
    a = rng.standard_normal((n, 2)) * 0.5 + [-sep / 2, 0]
    b = rng.standard_normal((n, 2)) * 0.5 + [sep / 2, 0]
    return np.vstack([a, b]), np.repeat([0, 1], n)


def test_train_separable_blobs(rng):
    X, y = blobs(rng)
    Xv, yv = blobs(rng)
    model = classifier.train(X, y, Xv, yv, ("a", "b"), TrainConfig(seed=3))
    assert classifier.accuracy(model.weights, model.bias, Xv, yv) >= 0.99
    assert len(model.history) == 30
    assert all(math.isfinite(h["train_loss"]) for h in model.history)


def test_lr_zero_returns_init(rng):
    X, y = blobs(rng, 20)
    model = classifier.train(X, y, X, y, ("a", "b"), TrainConfig(epochs=3, learning_rate=0.0, seed=11))
    w0, b0, _ = classifier.init_params(2, 2, 11)
    assert np.array_equal(model.weights, w0.astype(np.float32))
    assert np.array_equal(model.bias, b0.astype(np.float32))


def test_init_bounds():
    w, b, _ = classifier.init_params(40, 9, 0)
    assert np.all(np.abs(w) <= math.sqrt(6 / 49)) and not b.any()


def test_training_is_deterministic(rng):
    X, y = blobs(rng, 30)
    cfg = TrainConfig(epochs=5, batch_size=7, seed=42)
    a = classifier.train(X, y, X, y, ("a", "b"), cfg)
    b = classifier.train(X, y, X, y, ("a", "b"), cfg)
    assert a.weights.tobytes() == b.weights.tobytes()
    assert a.bias.tobytes() == b.bias.tobytes()


def test_best_epoch_kept_earliest_on_tie(rng):
    X, y = blobs(rng, 30, sep=10)
    model = classifier.train(X, y, X, y, ("a", "b"), TrainConfig(epochs=6, seed=1))
    accs = [h["val_accuracy"] for h in model.history]
    best = accs.index(max(accs)) + 1
    again = classifier.train(X, y, X, y, ("a", "b"), TrainConfig(epochs=best, seed=1))
    assert np.array_equal(again.weights, model.weights)


def test_train_errors(rng):
    X, y = blobs(rng, 5)
    with pytest.raises(ModelError, match="two rooms"):
        classifier.train(X, np.zeros(10, int), X, np.zeros(10, int), ("a",))
    with pytest.raises(ModelError, match="empty"):
        classifier.train(X[:0], y[:0], X, y, ("a", "b"))
    with pytest.raises(ModelError, match="dim"):
        classifier.train(X, y, X[:, :1], y, ("a", "b"))
    with pytest.raises(ModelError, match="no training samples"):
        classifier.train(X, np.zeros(10, int), X, y, ("a", "b"))


def test_save_load_roundtrip(tmp_path, rng):
    model = SoftmaxModel(rng.standard_normal((3, 5)).astype(np.float32),
                         rng.standard_normal(3).astype(np.float32), ("kitchen", "ñandú", "b"))
    classifier.save(model, tmp_path / "m.hlcm")
    back = classifier.load(tmp_path / "m.hlcm")
    assert back.rooms == model.rooms
    assert back.weights.tobytes() == model.weights.tobytes()
    assert back.bias.tobytes() == model.bias.tobytes()
    raw = (tmp_path / "m.hlcm").read_bytes()
    assert raw[:4] == b"HLCM"
    (tmp_path / "t.hlcm").write_bytes(raw[:-2])
    with pytest.raises(ModelError):
        classifier.load(tmp_path / "t.hlcm")
    (tmp_path / "x.hlcm").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ModelError, match="magic"):
        classifier.load(tmp_path / "x.hlcm")
