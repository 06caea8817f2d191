import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pso_forecast.errors import ShapeError, SizeError
from pso_forecast.nn import (
    LSTM,
    Conv1D,
    Dense,
    Dropout,
    MaxPool1D,
    conv1d_forward,
    dense_forward,
    dropout_apply,
    loss,
    lstm_step,
)

from conftest import numeric_grad, rel_error


def _dense(W, b, act):
    layer = Dense(len(W), len(W[0]), act)
    layer.params["W"] = np.array(W, dtype=float)
    layer.params["b"] = np.array(b, dtype=float)
    return layer


class TestDenseForward:
    def test_identity(self):
        layer = _dense(np.eye(3), np.zeros(3), "linear")
        np.testing.assert_array_equal(dense_forward(layer, [1.0, -2.0, 3.5]), [1.0, -2.0, 3.5])

    def test_sum(self):
        assert dense_forward(_dense([[1], [1]], [0], "linear"), [2.0, 3.0])[0] == 5.0

    def test_sigmoid_of_zero(self):
        out = dense_forward(_dense(np.zeros((4, 3)), np.zeros(3), "sigmoid"), [1.0, 2.0, 3.0, 4.0])
        np.testing.assert_array_equal(out, 0.5)

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            dense_forward(_dense(np.eye(3), np.zeros(3), "linear"), [1.0, 2.0])


def _scalar_cell(bi=0.0, bf=0.0, bo=0.0, bc=0.0, w=0.0):
    W = [[w], [w]]  # rows: s_prev, x_t
    return LSTM.from_gates(W, W, W, W, [bi], [bf], [bo], [bc])


class TestLstmStep:
    def test_zero_everything(self):
        s, c = lstm_step(_scalar_cell(), [0.3], [0.0], [0.0])
        assert c[0] == 0.0 and s[0] == 0.0

    def test_zero_weights_unit_cell(self):
        s, c = lstm_step(_scalar_cell(), [0.0], [0.0], [1.0])
        assert c[0] == pytest.approx(0.5, abs=1e-12)
        assert s[0] == pytest.approx(0.5 * math.tanh(0.5), abs=1e-12)
        assert s[0] == pytest.approx(0.231059, abs=1e-6)

    def test_saturated_gates(self):
        s, c = lstm_step(_scalar_cell(bi=20, bf=20, bo=20), [0.4], [0.1], [0.7])
        sig = 1.0 / (1.0 + math.exp(-20.0))
        assert c[0] == pytest.approx(sig * 0.7, abs=1e-12)
        assert s[0] == pytest.approx(sig * math.tanh(sig * 0.7), abs=1e-12)
        assert c[0] == pytest.approx(0.7, abs=1e-8)
        assert s[0] == pytest.approx(math.tanh(0.7), abs=1e-8)

    def test_gate_views(self):
        cell = _scalar_cell(bi=1, bf=2, bo=3, bc=4)
        assert [cell.gate_weights(g)[1][0] for g in "ifoc"] == [1, 2, 3, 4]

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            lstm_step(_scalar_cell(), [0.0, 1.0], [0.0], [0.0])

    def test_batched_layer_matches_steps(self):
        rng = np.random.default_rng(5)
        layer = LSTM(3, 4, return_sequences=True, rng=rng)
        x = rng.normal(size=(2, 5, 3))
        out = layer.forward(x)
        for b in range(2):
            s, c = np.zeros(4), np.zeros(4)
            for t in range(5):
                s, c = lstm_step(layer, x[b, t], s, c)
                np.testing.assert_allclose(out[b, t], s, atol=1e-14)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000))
    def test_gate_and_output_ranges(self, seed):
        rng = np.random.default_rng(seed)
        layer = LSTM(3, 4, rng=rng)
        layer.params["W"] *= rng.uniform(0.1, 10)
        layer.params["b"] = rng.normal(scale=3, size=16)
        x = rng.normal(scale=3, size=(1, 6, 3))
        layer.forward(x)
        _, A, Z, _, S, _ = layer._cache
        gates, pre = Z[:, :, :12], A[:, :, :12]
        assert np.all(gates >= 0) and np.all(gates <= 1)
        # strictly inside while float64 can still resolve sigmoid from 0 and 1
        inner = np.abs(pre) < 30
        assert np.all(gates[inner] > 0) and np.all(gates[inner] < 1)
        assert np.all(np.abs(S) <= 1)


class TestConv1D:
    def _layer(self, kernel):
        layer = Conv1D(1, n_filters=1, kernel_size=len(kernel), activation="linear")
        layer.params["K"] = np.array(kernel, dtype=float).reshape(len(kernel), 1, 1)
        return layer

    def test_shift_kernel(self):
        out = conv1d_forward(self._layer([1, 0]), np.array([[1.0], [2.0], [3.0]]))
        np.testing.assert_array_equal(out[:, 0], [1.0, 2.0])

    def test_average_kernel(self):
        out = conv1d_forward(self._layer([0.5, 0.5]), np.array([[2.0], [4.0], [6.0]]))
        np.testing.assert_array_equal(out[:, 0], [3.0, 5.0])

    def test_too_short(self):
        with pytest.raises(SizeError):
            conv1d_forward(self._layer([1, 0]), np.array([[1.0]]))

    def test_pool_size_one_identity(self):
        x = np.random.default_rng(0).normal(size=(3, 7, 5))
        pool = MaxPool1D(1)
        assert pool.forward(x) is x
        assert pool.backward(x) is x

    def test_pool_size_two(self):
        x = np.array([[[1.0], [3.0], [2.0], [0.0], [9.0]]])
        np.testing.assert_array_equal(MaxPool1D(2).forward(x)[0, :, 0], [3.0, 2.0])


class TestDropout:
    def test_infer_identity(self):
        x = np.arange(10.0)
        np.testing.assert_array_equal(dropout_apply(x, 0.2, "infer"), x)

    def test_rate_zero(self):
        x = np.arange(10.0)
        np.testing.assert_array_equal(dropout_apply(x, 0.0, "train", np.random.default_rng(0)), x)

    def test_statistics(self):
        out = dropout_apply(np.ones(10_000), 0.2, "train", np.random.default_rng(0))
        zero_frac = np.mean(out == 0)
        assert abs(zero_frac - 0.2) <= 0.02
        assert np.all(out[out != 0] == pytest.approx(1.25))

    def test_backward_uses_mask(self):
        d = Dropout(0.5)
        out = d.forward(np.ones((4, 5)), training=True, rng=np.random.default_rng(1))
        np.testing.assert_array_equal(d.backward(np.ones((4, 5))), out)


class TestLoss:
    @pytest.mark.parametrize("kind", ["mse", "mae"])
    def test_perfect(self, kind):
        value, grad = loss(kind, np.array([1.0, 2.0]), np.array([1.0, 2.0]))
        assert value == 0 and np.all(grad == 0)

    def test_mse(self):
        value, grad = loss("mse", np.array([3.0, 4.0]), np.zeros(2))
        assert value == 12.5
        np.testing.assert_array_equal(grad, [3.0, 4.0])

    def test_mae(self):
        value, grad = loss("mae", np.array([3.0, -4.0]), np.zeros(2))
        assert value == 3.5
        np.testing.assert_array_equal(grad, [0.5, -0.5])

    def test_shape(self):
        with pytest.raises(ShapeError):
            loss("mse", np.zeros(3), np.zeros(2))


def _check_layer_grads(layer, x, rng, tol=1e-4):
    """Compare backward() with finite differences of sum(out * R)."""
    out = layer.forward(x)
    R = rng.normal(size=out.shape)
    f = lambda: float(np.sum(layer.forward(x) * R))  # noqa: E731
    layer.forward(x)
    dx = layer.backward(R)
    analytic = dict(layer.grads)
    assert rel_error(dx, numeric_grad(f, x)) < tol
    for name, p in layer.params.items():
        assert rel_error(analytic[name], numeric_grad(f, p)) < tol, name


class TestGradients:
    @pytest.mark.parametrize("act", ["linear", "sigmoid", "relu", "tanh"])
    def test_dense(self, act):
        rng = np.random.default_rng(11)
        layer = Dense(4, 3, act, rng=rng)
        layer.params["b"] = rng.normal(size=3)
        _check_layer_grads(layer, rng.normal(size=(5, 4)), rng)

    @pytest.mark.parametrize("act", ["tanh", "sigmoid"])
    @pytest.mark.parametrize("seq", [False, True])
    def test_lstm(self, act, seq):
        rng = np.random.default_rng(12)
        layer = LSTM(2, 3, activation=act, return_sequences=seq, rng=rng)
        layer.params["b"] = rng.normal(size=12)
        _check_layer_grads(layer, rng.normal(size=(2, 3, 2)), rng)

    def test_conv(self):
        rng = np.random.default_rng(13)
        layer = Conv1D(3, n_filters=4, kernel_size=2, activation="relu", rng=rng)
        layer.params["b"] = rng.normal(size=4)
        _check_layer_grads(layer, rng.normal(size=(2, 6, 3)), rng)

    def test_maxpool(self):
        rng = np.random.default_rng(14)
        _check_layer_grads(MaxPool1D(2), rng.normal(size=(2, 6, 3)), rng)
