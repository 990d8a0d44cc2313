import numpy as np
import pytest

from gridsentry.neural import (Dense, LSTM, LeakyReLU, ReLU,
                               SequencePredictor, Sequential, Sigmoid,
                               Softmax, TrainConfig, grad_check, get_state,
                               load_state, lstm_step, mse, save_state,
                               set_state, softmax, softmax_cross_entropy,
                               train)


def rng(seed=0):
    return np.random.default_rng(seed)


# ---------------------------------------------------------------- dense

def test_dense_identity():
    d = Dense(3, 3, rng())
    d.params["W"] = np.eye(3)
    d.params["b"] = np.zeros(3)
    x = rng(1).standard_normal((5, 3))
    np.testing.assert_array_equal(d.forward(x), x)


def test_dense_constant():
    d = Dense(4, 2, rng())
    d.params["W"] = np.zeros((4, 2))
    d.params["b"] = np.array([1.5, -2.0])
    x = rng(1).standard_normal((7, 4))
    out = d.forward(x)
    np.testing.assert_allclose(out, np.broadcast_to([1.5, -2.0], (7, 2)))


def test_dense_shape_error():
    d = Dense(4, 2, rng())
    with pytest.raises(ValueError):
        d.forward(np.zeros((3, 5)))


def test_dense_grad_matches_finite_differences():
    d = Dense(4, 3, rng(2))
    x = rng(3).standard_normal((6, 4))
    y = rng(4).standard_normal((6, 3))
    m = Sequential([d])
    assert grad_check(m, x, y) < 1e-4


# ---------------------------------------------------------------- activations

def test_relu_values():
    r = ReLU()
    np.testing.assert_array_equal(r.forward(np.array([-1.0, 2.0])),
                                  np.array([0.0, 2.0]))


def test_softmax_rows_sum_to_one():
    x = rng(5).standard_normal((20, 9)) * 10
    p = softmax(x)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(p > 0) and np.all(p < 1)


def test_softmax_overflow_stable():
    p = softmax(np.array([[1000.0, 0.0, -1000.0]]))
    assert np.all(np.isfinite(p))
    assert p[0, 0] == pytest.approx(1.0)


def test_leaky_relu_negative_slope():
    lr = LeakyReLU(alpha=0.01)
    x = np.array([[-2.0, 3.0]])
    lr.forward(x)
    grad = lr.backward(np.ones_like(x))
    np.testing.assert_allclose(grad, [[0.01, 1.0]])


# ---------------------------------------------------------------- LSTM

def test_lstm_zero_weights():
    cell = LSTM(2, 3, rng(0))
    for k in cell.params:
        cell.params[k] = np.zeros_like(cell.params[k])
    out = cell.forward(np.ones((1, 4, 2)))
    np.testing.assert_array_equal(out, np.zeros((1, 4, 3)))


def test_lstm_forget_gate_saturation():
    # forget bias -> +inf: new cell state approaches c + i*g
    H = 3
    cell = LSTM(2, H, rng(1))
    cell.params["b"][H:2 * H] = 20.0
    h0 = np.zeros((1, H))
    c0 = rng(2).standard_normal((1, H))
    x = rng(3).standard_normal((1, 2))
    _, (_, c1) = lstm_step(cell, x, (h0, c0))
    z = x @ cell.params["Wx"] + h0 @ cell.params["Wh"] + cell.params["b"]
    i = 1 / (1 + np.exp(-z[:, :H]))
    g = np.tanh(z[:, 2 * H:3 * H])
    np.testing.assert_allclose(c1, c0 + i * g, atol=1e-6)


def test_lstm_step_matches_sequence_forward():
    cell = LSTM(3, 4, rng(4))
    x = rng(5).standard_normal((2, 6, 3))
    hs = cell.forward(x)
    state = (np.zeros((2, 4)), np.zeros((2, 4)))
    for t in range(6):
        h, state = lstm_step(cell, x[:, t], state)
        np.testing.assert_allclose(h, hs[:, t], atol=1e-12)


def test_lstm_bptt_grad_matches_finite_differences():
    cell = LSTM(3, 4, rng(6))
    x = rng(7).standard_normal((2, 8, 3))
    y = rng(8).standard_normal((2, 8, 4))
    assert grad_check(cell, x, y) < 1e-4


def test_sequence_predictor_grad_with_mask():
    model = SequencePredictor(3, 5, 3, rng(9))
    x = rng(10).standard_normal((2, 12, 3))
    y = rng(11).standard_normal((2, 12, 3))
    mask = np.zeros((2, 12))
    mask[:, 4:] = 1.0
    assert grad_check(model, x, y, mask=mask) < 1e-4


# ---------------------------------------------------------------- losses

def test_mse_zero_on_equal():
    x = rng(0).standard_normal((4, 3))
    loss, grad = mse(x, x.copy())
    assert loss == 0.0
    np.testing.assert_array_equal(grad, 0.0)


def test_cross_entropy_uniform():
    logits = np.zeros((5, 9))
    loss, _, p = softmax_cross_entropy(logits, np.arange(5) % 9)
    assert loss == pytest.approx(np.log(9))
    np.testing.assert_allclose(p, 1 / 9)


def test_fused_ce_gradient_formula_and_fd():
    logits = rng(12).standard_normal((6, 4))
    labels = np.array([0, 1, 2, 3, 0, 1])
    _, grad, p = softmax_cross_entropy(logits, labels)
    onehot = np.eye(4)[labels]
    np.testing.assert_allclose(grad, (p - onehot) / 6, atol=1e-12)

    model = Sequential([Dense(3, 4, rng(13))])
    x = rng(14).standard_normal((6, 3))
    assert grad_check(model, x, labels, loss="cross_entropy") < 1e-4


# ---------------------------------------------------------------- training

def make_mlp(sizes, seed=0, act=ReLU):
    r = rng(seed)
    layers = []
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        layers.append(Dense(a, b, r))
        if i < len(sizes) - 2:
            layers.append(act())
    return Sequential(layers)


def test_train_zero_learning_rate():
    model = make_mlp([2, 4, 1], seed=1)
    before = get_state(model)
    x = rng(2).standard_normal((32, 2))
    y = rng(3).standard_normal((32, 1))
    train(model, x, y, TrainConfig(learning_rate=0.0, epochs=3, seed=0))
    after = get_state(model)
    for k in before:
        np.testing.assert_array_equal(before[k], after[k])


def test_train_linear_regression():
    # closed-form oracle: y = 2x + 1
    x = np.linspace(-1, 1, 100).reshape(-1, 1)
    y = 2.0 * x + 1.0
    model = Sequential([Dense(1, 1, rng(4))])
    train(model, x, y, TrainConfig(learning_rate=0.05, epochs=400,
                                   batch_size=25, seed=0))
    assert model.layers[0].params["W"][0, 0] == pytest.approx(2.0, abs=1e-2)
    assert model.layers[0].params["b"][0] == pytest.approx(1.0, abs=1e-2)


def test_train_deterministic():
    x = rng(5).standard_normal((64, 3))
    y = rng(6).standard_normal((64, 2))
    h1 = train(make_mlp([3, 8, 2], seed=7), x, y,
               TrainConfig(epochs=5, seed=11))
    h2 = train(make_mlp([3, 8, 2], seed=7), x, y,
               TrainConfig(epochs=5, seed=11))
    assert h1 == h2


def test_train_rejects_empty():
    with pytest.raises(ValueError):
        train(make_mlp([2, 1]), np.zeros((0, 2)), np.zeros((0, 1)),
              TrainConfig())


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1)
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)


# ---------------------------------------------------------------- autoencoder shape

def test_autoencoder_grad_check():
    # seed chosen so no pre-activation sits within the finite-difference
    # step of the leaky ReLU kink
    r = rng(26)
    enc = Sequential([Dense(6, 5, r), LeakyReLU(), Dense(5, 4, r),
                      LeakyReLU(), Dense(4, 3, r)])
    dec = Sequential([Dense(3, 4, r), LeakyReLU(), Dense(4, 5, r),
                      LeakyReLU(), Dense(5, 6, r)])
    model = Sequential([enc, dec])
    x = rng(126).standard_normal((4, 6))
    assert grad_check(model, x, x.copy()) < 1e-4


# ---------------------------------------------------------------- persistence

def test_state_roundtrip(tmp_path):
    model = make_mlp([3, 5, 2], seed=3)
    x = rng(1).standard_normal((4, 3))
    ref = model.forward(x)
    path = tmp_path / "model.npz"
    save_state(model, path, extra={"label_order": np.arange(9)})
    clone = make_mlp([3, 5, 2], seed=99)
    extra = load_state(clone, path)
    np.testing.assert_array_equal(clone.forward(x), ref)
    np.testing.assert_array_equal(extra["label_order"], np.arange(9))


def test_set_state_shape_guard():
    model = make_mlp([3, 5, 2], seed=3)
    state = get_state(model)
    key = next(iter(state))
    state[key] = np.zeros((1, 1))
    with pytest.raises(ValueError):
        set_state(model, state)
