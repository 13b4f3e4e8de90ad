import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tandem_ru.neuralnet import (
    MlpModel,
    ModelFormatError,
    TrainConfig,
    forward,
    init_model,
    load_model,
    loss_and_grad,
    save_model,
    sgdm_step,
    train,
    weights_digest,
    zero_model,
)

from oracles import numeric_grad


def batch(n, d, c, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(0, 1, (n, d)), rng.integers(0, c, n)


def test_init_deterministic_and_bounded():
    a, b = init_model(80, 9, seed=3), init_model(80, 9, seed=3)
    assert a.layer_dims == [80, 128, 50, 8, 9]
    assert weights_digest(a) == weights_digest(b)
    assert weights_digest(a) != weights_digest(init_model(80, 9, seed=4))
    for w, bias in zip(a.weights, a.biases):
        s = math.sqrt(6 / sum(w.shape))
        assert np.all(np.abs(w) <= s) and np.all(bias == 0)
    with pytest.raises(ValueError):
        init_model(0, 3)


def test_init_bound_over_many_draws():
    w = init_model(1000, 1, seed=0, hidden=()).weights[0]
    s = math.sqrt(6 / 1001)
    assert w.size == 1000 and np.all(np.abs(w) <= s)
    assert np.max(np.abs(w)) > 0.95 * s  # the whole interval is used


def test_zero_model_uniform_output_and_ln_c_loss():
    m = zero_model(64, 9)
    p = forward(m, np.random.default_rng(0).normal(size=(5, 64)))
    np.testing.assert_allclose(p, 1 / 9, rtol=0, atol=1e-15)
    X, y = batch(10, 64, 9)
    assert loss_and_grad(m, X, y)[0] == pytest.approx(math.log(9), abs=1e-12)
    X, y = batch(10, 128, 16)
    assert loss_and_grad(zero_model(128, 16), X, y)[0] == pytest.approx(math.log(16), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_softmax_sums_to_one(seed):
    m = init_model(20, 7, seed=seed % 7, init_scale=3.0)
    x = np.random.default_rng(seed).normal(scale=50, size=(1000, 20))
    p = forward(m, x)
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)


def test_softmax_shift_invariance():
    m = init_model(10, 4, seed=1)
    x = np.random.default_rng(2).normal(size=10)
    shifted = MlpModel(m.layer_dims, [w.copy() for w in m.weights], [b.copy() for b in m.biases])
    shifted.biases[-1] += 123.0  # adds a constant to every logit
    np.testing.assert_allclose(forward(m, x), forward(shifted, x), atol=1e-12)


def test_forward_rejects_bad_input():
    m = init_model(4, 2)
    with pytest.raises(ValueError):
        forward(m, [0, 0, np.nan, 0])
    with pytest.raises(ValueError):
        forward(m, [0, 0, 0])


def test_saturated_prediction_has_tiny_loss():
    m = zero_model(3, 4, hidden=())
    m.biases[0][:] = [0, 0, 40.0, 0]
    assert loss_and_grad(m, np.zeros((1, 3)), np.array([2]))[0] <= 1e-6


@pytest.mark.parametrize("dims", [(64, 9), (80, 9), (128, 16)])
def test_gradients_match_finite_differences(dims):
    X, y = batch(10, *dims, seed=dims[0])
    m = init_model(*dims, seed=1)
    _, grads = loss_and_grad(m, X, y)
    analytic = [g for pair in grads for g in pair]
    numeric = numeric_grad(lambda: loss_and_grad(m, X, y)[0], m.params())
    for a, n in zip(analytic, numeric):
        assert np.linalg.norm(a - n) <= 1e-5 * max(np.linalg.norm(a), np.linalg.norm(n))
        # entrywise, up to the ~1e-11 round-off floor of the difference quotient
        np.testing.assert_allclose(a, n, rtol=1e-5, atol=1e-10)


def test_plain_sgd_step_is_exact():
    m = init_model(5, 3, seed=0)
    X, y = batch(4, 5, 3)
    _, grads = loss_and_grad(m, X, y)
    want = [w - 0.01 * g for w, (g, _) in zip(m.weights, grads)]
    velocity = [(np.zeros_like(w), np.zeros_like(b)) for w, b in zip(m.weights, m.biases)]
    sgdm_step(m, grads, velocity, 0.01, 0.0)
    for w, expected in zip(m.weights, want):
        np.testing.assert_array_equal(w, expected)


def test_momentum_update_rule():
    m = init_model(5, 3, seed=0)
    X, y = batch(4, 5, 3)
    velocity = [(np.full_like(w, 0.1), np.zeros_like(b)) for w, b in zip(m.weights, m.biases)]
    before = [w.copy() for w in m.weights]
    _, grads = loss_and_grad(m, X, y)
    sgdm_step(m, grads, velocity, 0.01, 0.9)
    for w0, w1, (g, _) in zip(before, m.weights, grads):
        v = 0.9 * 0.1 - 0.01 * g
        np.testing.assert_allclose(w1, w0 + v, rtol=0, atol=1e-15)


def blobs(seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(-2, 0.5, (50, 2)), rng.normal(2, 0.5, (50, 2))])
    return X, np.repeat([0, 1], 50)


def test_separable_blobs_reach_full_accuracy():
    X, y = blobs()
    model, report = train(init_model(2, 2, seed=0), (X, y), (X, y), TrainConfig(epochs=100))
    assert max(report.train_accuracy) == 1.0
    assert model.trained and report.best_val_accuracy == 1.0


def test_training_deterministic_and_reports_per_epoch():
    X, y = blobs(1)
    cfg = TrainConfig(epochs=15, batch_size=8, seed=5)
    a, ra = train(init_model(2, 2, seed=0), (X, y), (X[:20], y[:20]), cfg)
    b, rb = train(init_model(2, 2, seed=0), (X, y), (X[:20], y[:20]), cfg)
    assert ra.to_dict() == rb.to_dict()
    assert weights_digest(a) == weights_digest(b)
    assert len(ra.train_loss) == len(ra.train_accuracy) == len(ra.val_accuracy) == 15
    assert all(math.isfinite(v) for v in ra.train_loss)
    assert ra.best_val_accuracy == max(ra.val_accuracy)
    assert ra.selection == "best_val_accuracy"


def test_train_rejects_dimension_mismatch():
    X, y = blobs()
    with pytest.raises(ValueError):
        train(init_model(3, 2), (X, y), (X, y), TrainConfig(epochs=1))


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(momentum=1.0)


def test_save_load_round_trip(tmp_path):
    m = init_model(80, 9, seed=2)
    m.metadata = {"config_hash": "abc", "seed": 2}
    path = tmp_path / "m.json"
    save_model(m, path)
    back = load_model(path)
    assert back.layer_dims == m.layer_dims and back.metadata == m.metadata
    assert weights_digest(back) == weights_digest(m)
    x = np.random.default_rng(0).uniform(size=(100, 80))
    np.testing.assert_array_equal(forward(m, x), forward(back, x))


def test_load_rejects_inconsistent_dims(tmp_path):
    path = tmp_path / "m.json"
    save_model(init_model(4, 2), path)
    text = path.read_text().replace('"layer_dims": [4,', '"layer_dims": [5,')
    path.write_text(text)
    with pytest.raises(ModelFormatError):
        load_model(path)
    path.write_text("not json")
    with pytest.raises(ModelFormatError):
        load_model(path)
