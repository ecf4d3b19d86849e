"""Gradient and contract tests for the network layers and losses."""

import numpy as np
import pytest

from cvepkit.nn.layers import (
    AdaptiveMaxPoolTime,
    BCEWithLogits,
    Dense,
    Dropout,
    Flatten,
    MaxPoolTime,
    MSELoss,
    Parameter,
    ReLU,
    Sequential,
    Sigmoid,
    SoftmaxCrossEntropy,
    TemporalConv,
    ToTimeMajor,
)


def _fd_grad(f, x, eps=1e-6):
    """Central finite-difference gradient of scalar f at x."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f()
        flat[i] = orig - eps
        lo = f()
        flat[i] = orig
        gf[i] = (hi - lo) / (2 * eps)
    return g


def _check_layer_grads(layer, x, rtol=1e-6):
    """Compare backward() to finite differences for input and parameters."""
    probe = np.random.default_rng(99).normal(size=layer.forward(x).shape)

    def loss():
        return float((layer.forward(x) * probe).sum())

    layer.forward(x, training=True)
    dx = layer.backward(probe)

    want_dx = _fd_grad(loss, x)
    np.testing.assert_allclose(dx, want_dx, rtol=rtol, atol=1e-7)
    for p in layer.params():
        want = _fd_grad(loss, p.value)
        np.testing.assert_allclose(p.grad, want, rtol=rtol, atol=1e-7)


def test_parameter_container():
    p = Parameter(np.ones(3), name="w")
    assert p.name == "w"
    np.testing.assert_array_equal(p.grad, np.zeros(3))


def test_dense_gradients():
    rng = np.random.default_rng(0)
    layer = Dense(4, 3, rng, dtype=np.float64)
    x = rng.normal(size=(5, 4))
    _check_layer_grads(layer, x)


def test_dense_broadcasts_over_time():
    rng = np.random.default_rng(1)
    layer = Dense(4, 2, rng, dtype=np.float64)
    x = rng.normal(size=(3, 7, 4))
    y = layer.forward(x)
    assert y.shape == (3, 7, 2)
    np.testing.assert_allclose(y[1, 5], x[1, 5] @ layer.weight.value + layer.bias.value)
    _check_layer_grads(layer, x)


def test_temporal_conv_gradients_and_shape():
    rng = np.random.default_rng(2)
    layer = TemporalConv(3, 2, kernel=4, rng=rng, dtype=np.float64)
    x = rng.normal(size=(2, 9, 3))
    y = layer.forward(x)
    assert y.shape == (2, 6, 2)
    _check_layer_grads(layer, x)


def test_temporal_conv_matches_direct_convolution():
    rng = np.random.default_rng(3)
    layer = TemporalConv(2, 1, kernel=3, rng=rng, dtype=np.float64)
    x = rng.normal(size=(1, 8, 2))
    y = layer.forward(x)
    w = layer.weight.value.reshape(3, 2)
    for t in range(6):
        want = float((x[0, t:t + 3] * w).sum()) + float(layer.bias.value[0])
        assert y[0, t, 0] == pytest.approx(want, abs=1e-12)


def test_temporal_conv_short_input_raises():
    rng = np.random.default_rng(4)
    layer = TemporalConv(2, 1, kernel=5, rng=rng)
    with pytest.raises(ValueError):
        layer.forward(np.zeros((1, 4, 2), dtype=np.float32))


def test_relu_gradients():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(4, 6))
    x[np.abs(x) < 0.05] = 0.5  # keep clear of the kink
    _check_layer_grads(ReLU(), x)


def test_sigmoid_gradients_and_saturation():
    rng = np.random.default_rng(6)
    _check_layer_grads(Sigmoid(), rng.normal(size=(3, 5)))
    y = Sigmoid().forward(np.array([[-800.0, 800.0]]))
    np.testing.assert_array_equal(y, [[0.0, 1.0]])


def test_maxpool_time_gradients():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(2, 9, 3))  # remainder sample is dropped
    layer = MaxPoolTime(2)
    y = layer.forward(x)
    assert y.shape == (2, 4, 3)
    np.testing.assert_allclose(y[0, 0], np.maximum(x[0, 0], x[0, 1]))
    _check_layer_grads(layer, x)


def test_maxpool_time_remainder_gets_zero_grad():
    rng = np.random.default_rng(8)
    x = rng.normal(size=(1, 5, 2))
    layer = MaxPoolTime(2)
    layer.forward(x, training=True)
    dx = layer.backward(np.ones((1, 2, 2)))
    np.testing.assert_array_equal(dx[:, 4, :], 0.0)


def test_adaptive_maxpool_bins_and_gradients():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(2, 10, 3))
    layer = AdaptiveMaxPoolTime(4)
    y = layer.forward(x)
    assert y.shape == (2, 4, 3)
    # Bin edges at floor(i * 10 / 4): [0, 2, 5, 7, 10].
    np.testing.assert_allclose(y[0, 0], x[0, 0:2].max(axis=0))
    np.testing.assert_allclose(y[0, 1], x[0, 2:5].max(axis=0))
    np.testing.assert_allclose(y[0, 3], x[0, 7:10].max(axis=0))
    _check_layer_grads(layer, x)


def test_adaptive_maxpool_identity_width():
    rng = np.random.default_rng(10)
    x = rng.normal(size=(1, 4, 2))
    y = AdaptiveMaxPoolTime(4).forward(x)
    np.testing.assert_array_equal(y, x)
    with pytest.raises(ValueError):
        AdaptiveMaxPoolTime(6).forward(x)


def test_dropout_semantics():
    rng = np.random.default_rng(11)
    layer = Dropout(0.4, rng)
    x = np.ones((200, 50))
    y = layer.forward(x, training=True)
    kept = y != 0
    np.testing.assert_allclose(y[kept], 1.0 / 0.6, atol=1e-12)
    assert abs(kept.mean() - 0.6) < 0.02
    dy = np.full_like(x, 2.0)
    dx = layer.backward(dy)
    np.testing.assert_allclose(dx, 2.0 * y, atol=1e-12)
    # Inference is the identity.
    np.testing.assert_array_equal(layer.forward(x, training=False), x)
    np.testing.assert_array_equal(Dropout(0.0, rng).forward(x, training=True), x)
    with pytest.raises(ValueError):
        Dropout(1.0, rng)


def test_flatten_round_trip():
    rng = np.random.default_rng(12)
    x = rng.normal(size=(3, 4, 5))
    layer = Flatten()
    y = layer.forward(x, training=True)
    assert y.shape == (3, 20)
    dx = layer.backward(y)
    np.testing.assert_array_equal(dx, x)


def test_to_time_major():
    rng = np.random.default_rng(13)
    x = rng.normal(size=(2, 8, 30))  # (batch, channels, samples)
    layer = ToTimeMajor()
    y = layer.forward(x)
    assert y.shape == (2, 30, 8)
    np.testing.assert_array_equal(y[0, 5], x[0, :, 5])
    assert layer.backward(y) is None


def test_sequential_chain_gradients():
    rng = np.random.default_rng(14)
    net = Sequential([
        TemporalConv(2, 3, kernel=3, rng=rng, dtype=np.float64),
        ReLU(),
        MaxPoolTime(2),
        Flatten(),
        Dense(9, 4, rng, dtype=np.float64),
    ])
    assert len(net.params()) == 4
    x = rng.normal(size=(2, 8, 2))
    _check_layer_grads(net, x)


def test_mse_loss_gradient():
    rng = np.random.default_rng(15)
    pred = rng.normal(size=(4, 3))
    target = rng.normal(size=(4, 3))
    loss = MSELoss()
    value = loss.forward(pred, target)
    assert value == pytest.approx(np.mean((pred - target) ** 2))
    grad = loss.backward()
    want = _fd_grad(lambda: MSELoss().forward(pred, target), pred)
    np.testing.assert_allclose(grad, want, rtol=1e-6, atol=1e-9)


def test_softmax_cross_entropy():
    rng = np.random.default_rng(16)
    logits = rng.normal(size=(5, 6))
    labels = rng.integers(0, 6, size=5)
    probs = SoftmaxCrossEntropy.probabilities(logits)
    np.testing.assert_allclose(probs.sum(axis=1), np.ones(5), atol=1e-12)
    loss = SoftmaxCrossEntropy()
    value = loss.forward(logits, labels)
    want_value = -np.mean(np.log(probs[np.arange(5), labels]))
    assert value == pytest.approx(want_value, abs=1e-9)
    grad = loss.backward()
    want = _fd_grad(lambda: SoftmaxCrossEntropy().forward(logits, labels), logits)
    np.testing.assert_allclose(grad, want, rtol=1e-6, atol=1e-9)


def test_softmax_stable_for_large_logits():
    logits = np.array([[1000.0, 0.0], [-1000.0, 0.0]])
    probs = SoftmaxCrossEntropy.probabilities(logits)
    np.testing.assert_allclose(probs, [[1.0, 0.0], [0.0, 1.0]], atol=1e-12)


def test_bce_with_logits():
    rng = np.random.default_rng(17)
    logits = rng.normal(size=12)
    targets = rng.integers(0, 2, size=12).astype(np.float64)
    loss = BCEWithLogits()
    value = loss.forward(logits, targets)
    p = 1.0 / (1.0 + np.exp(-logits))
    want_value = -np.mean(targets * np.log(p) + (1 - targets) * np.log(1 - p))
    assert value == pytest.approx(want_value, abs=1e-9)
    grad = loss.backward()
    want = _fd_grad(lambda: BCEWithLogits().forward(logits, targets), logits)
    np.testing.assert_allclose(grad, want, rtol=1e-6, atol=1e-9)


def test_bce_stable_for_large_logits():
    loss = BCEWithLogits()
    value = loss.forward(np.array([1000.0, -1000.0]), np.array([1.0, 0.0]))
    assert value == pytest.approx(0.0, abs=1e-12)
    value = loss.forward(np.array([1000.0, -1000.0]), np.array([0.0, 1.0]))
    assert value == pytest.approx(1000.0, rel=1e-9)
    assert np.all(np.isfinite(loss.backward()))
