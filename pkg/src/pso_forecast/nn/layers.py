"""Layers with hand-written forward and backward passes.

Every layer works on batches: dense layers take ``(batch, features)``, the
recurrent and convolutional layers take ``(batch, time, channels)``. A
``forward`` call caches what ``backward`` needs; ``backward`` receives the
gradient of the loss w.r.t. the layer output, fills ``self.grads`` and
returns the gradient w.r.t. the layer input.
"""

from __future__ import annotations

import numpy as np

from ..errors import NumericError, ShapeError, SizeError, ValidationError

ACTIVATIONS = ("linear", "sigmoid", "relu", "tanh")


def sigmoid(x):
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def activate(name, x):
    if name == "linear":
        return x
    if name == "sigmoid":
        return sigmoid(x)
    if name == "relu":
        return np.maximum(x, 0.0)
    if name == "tanh":
        return np.tanh(x)
    raise ValidationError(f"unknown activation {name!r}")


def activation_grad(name, pre, out):
    """d out / d pre, given both the pre-activation and the activation."""
    if name == "linear":
        return np.ones_like(pre)
    if name == "sigmoid":
        return out * (1.0 - out)
    if name == "relu":
        return (pre > 0.0).astype(pre.dtype)
    if name == "tanh":
        return 1.0 - out * out
    raise ValidationError(f"unknown activation {name!r}")


def glorot_uniform(rng, fan_in, fan_out, shape=None):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


class Layer:
    name = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def forward(self, x, training=False, rng=None):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def output_shape(self, input_shape):
        return input_shape

    def n_params(self):
        return sum(p.size for p in self.params.values())


class Dense(Layer):
    """``out = act(x @ W + b)`` with ``W`` of shape ``(in, out)``."""

    name = "dense"

    def __init__(self, n_in, n_out, activation="linear", rng=None):
        super().__init__()
        if activation not in ACTIVATIONS:
            raise ValidationError(f"unknown activation {activation!r}")
        self.n_in, self.n_out, self.activation = n_in, n_out, activation
        rng = rng if rng is not None else np.random.default_rng(0)
        self.params = {"W": glorot_uniform(rng, n_in, n_out), "b": np.zeros(n_out)}

    def forward(self, x, training=False, rng=None):
        if x.shape[-1] != self.n_in:
            raise ShapeError(f"dense layer expects {self.n_in} inputs, got {x.shape[-1]}")
        pre = x @ self.params["W"] + self.params["b"]
        out = activate(self.activation, pre)
        self._cache = (x, pre, out)
        return out

    def backward(self, grad):
        x, pre, out = self._cache
        if self.activation != "linear":
            grad = grad * activation_grad(self.activation, pre, out)
        self.grads = {"W": x.T @ grad, "b": grad.sum(axis=0)}
        return grad @ self.params["W"].T

    def output_shape(self, input_shape):
        return (self.n_out,)


def dense_forward(layer: Dense, x):
    """Single-sample convenience wrapper: ``x`` is a vector of length ``in``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError("dense_forward takes a single input vector")
    return layer.forward(x[None, :])[0]


class Dropout(Layer):
    """Inverted dropout: survivors are scaled by ``1 / (1 - rate)`` at train time."""

    name = "dropout"

    def __init__(self, rate=0.2):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValidationError("dropout rate must lie in [0, 1)")
        self.rate = rate

    def forward(self, x, training=False, rng=None):
        if not training or self.rate == 0.0:
            self._mask = None
            return x
        if rng is None:
            raise ValidationError("dropout in training mode needs an rng")
        keep = 1.0 - self.rate
        self._mask = (rng.random(x.shape) < keep) / keep
        return x * self._mask

    def backward(self, grad):
        return grad if self._mask is None else grad * self._mask


def dropout_apply(x, rate=0.2, mode="train", rng=None):
    if mode not in ("train", "infer"):
        raise ValidationError("mode must be 'train' or 'infer'")
    return Dropout(rate).forward(np.asarray(x, dtype=np.float64), training=mode == "train", rng=rng)


class Flatten(Layer):
    name = "flatten"

    def forward(self, x, training=False, rng=None):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)


class MaxPool1D(Layer):
    """Non-overlapping max pooling over time; ``size=1`` is the identity."""

    name = "maxpool1d"

    def __init__(self, size=1):
        super().__init__()
        if size < 1:
            raise ValidationError("pool size must be >= 1")
        self.size = size

    def forward(self, x, training=False, rng=None):
        if self.size == 1:
            return x
        b, t, c = x.shape
        t_out = t // self.size
        if t_out == 0:
            raise SizeError(f"sequence of length {t} is shorter than pool size {self.size}")
        blocks = x[:, : t_out * self.size].reshape(b, t_out, self.size, c)
        idx = blocks.argmax(axis=2)
        self._cache = (x.shape, idx)
        return np.take_along_axis(blocks, idx[:, :, None, :], axis=2)[:, :, 0, :]

    def backward(self, grad):
        if self.size == 1:
            return grad
        shape, idx = self._cache
        b, t_out, c = grad.shape
        blocks = np.zeros((b, t_out, self.size, c))
        np.put_along_axis(blocks, idx[:, :, None, :], grad[:, :, None, :], axis=2)
        dx = np.zeros(shape)
        dx[:, : t_out * self.size] = blocks.reshape(b, t_out * self.size, c)
        return dx

    def output_shape(self, input_shape):
        t, c = input_shape
        return (t // self.size, c)


class Conv1D(Layer):
    """Valid (unpadded) 1-D cross-correlation over time.

    ``y[:, t, f] = act(sum_k sum_c K[k, c, f] * x[:, t + k, c] + b[f])``
    """

    name = "conv1d"

    def __init__(self, n_channels, n_filters=64, kernel_size=2, activation="relu", rng=None):
        super().__init__()
        if activation not in ACTIVATIONS:
            raise ValidationError(f"unknown activation {activation!r}")
        self.n_channels, self.n_filters, self.kernel_size = n_channels, n_filters, kernel_size
        self.activation = activation
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in, fan_out = kernel_size * n_channels, kernel_size * n_filters
        self.params = {
            "K": glorot_uniform(rng, fan_in, fan_out, (kernel_size, n_channels, n_filters)),
            "b": np.zeros(n_filters),
        }

    def forward(self, x, training=False, rng=None):
        if x.ndim != 3 or x.shape[2] != self.n_channels:
            raise ShapeError(f"conv1d expects (batch, time, {self.n_channels}), got {x.shape}")
        t_out = x.shape[1] - self.kernel_size + 1
        if t_out < 1:
            raise SizeError(f"sequence of length {x.shape[1]} is shorter than kernel {self.kernel_size}")
        K = self.params["K"]
        pre = self.params["b"] + x[:, 0:t_out] @ K[0]
        for k in range(1, self.kernel_size):
            pre = pre + x[:, k:k + t_out] @ K[k]
        out = activate(self.activation, pre)
        self._cache = (x, pre, out)
        return out

    def backward(self, grad):
        x, pre, out = self._cache
        if self.activation != "linear":
            grad = grad * activation_grad(self.activation, pre, out)
        t_out = grad.shape[1]
        K = self.params["K"]
        dK = np.empty_like(K)
        dx = np.zeros_like(x)
        g2 = grad.reshape(-1, self.n_filters)
        for k in range(self.kernel_size):
            xs = x[:, k:k + t_out].reshape(-1, self.n_channels)
            dK[k] = xs.T @ g2
            dx[:, k:k + t_out] += grad @ K[k].T
        self.grads = {"K": dK, "b": g2.sum(axis=0)}
        return dx

    def output_shape(self, input_shape):
        t, _ = input_shape
        return (t - self.kernel_size + 1, self.n_filters)


def conv1d_forward(layer: Conv1D, x):
    """Single-sample wrapper: ``x`` has shape ``(T, channels)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError("conv1d_forward takes a (time, channels) array")
    return layer.forward(x[None])[0]


class LSTM(Layer):
    """Recurrent layer of LSTM cells unrolled over the full window.

    The four gate matrices act on the concatenation ``[s_prev, x_t]`` and are
    stored side by side in one ``(hidden + input, 4 * hidden)`` matrix in the
    order input, forget, output, candidate::

        i = sigmoid([s, x] @ W_i + b_i)
        f = sigmoid([s, x] @ W_f + b_f)
        o = sigmoid([s, x] @ W_o + b_o)
        c = f * c_prev + i * act([s, x] @ W_c + b_c)
        s = o * act(c)

    ``act`` is tanh unless another activation is requested.
    """

    name = "lstm"
    GATES = ("i", "f", "o", "c")

    def __init__(self, n_in, n_hidden, activation="tanh", return_sequences=False, rng=None):
        super().__init__()
        if activation not in ACTIVATIONS:
            raise ValidationError(f"unknown activation {activation!r}")
        self.n_in, self.n_hidden, self.activation = n_in, n_hidden, activation
        self.return_sequences = return_sequences
        rng = rng if rng is not None else np.random.default_rng(0)
        rows = n_hidden + n_in
        W = np.concatenate([glorot_uniform(rng, rows, n_hidden) for _ in self.GATES], axis=1)
        self.params = {"W": W, "b": np.zeros(4 * n_hidden)}

    @classmethod
    def from_gates(cls, W_i, W_f, W_o, W_c, b_i, b_f, b_o, b_c, activation="tanh"):
        W_i = np.atleast_2d(np.asarray(W_i, dtype=np.float64))
        n_hidden = W_i.shape[1]
        layer = cls(W_i.shape[0] - n_hidden, n_hidden, activation=activation)
        layer.params["W"] = np.concatenate(
            [np.atleast_2d(np.asarray(w, dtype=np.float64)) for w in (W_i, W_f, W_o, W_c)], axis=1)
        layer.params["b"] = np.concatenate(
            [np.atleast_1d(np.asarray(b, dtype=np.float64)) for b in (b_i, b_f, b_o, b_c)])
        if layer.params["W"].shape != (W_i.shape[0], 4 * n_hidden) or layer.params["b"].shape != (4 * n_hidden,):
            raise ShapeError("all gate matrices and biases must share one shape")
        return layer

    def gate_weights(self, gate):
        k = self.GATES.index(gate)
        h = self.n_hidden
        return self.params["W"][:, k * h:(k + 1) * h], self.params["b"][k * h:(k + 1) * h]

    def _step(self, a):
        h = self.n_hidden
        gates = sigmoid(a[:, :3 * h])
        g = activate(self.activation, a[:, 3 * h:])
        return gates[:, :h], gates[:, h:2 * h], gates[:, 2 * h:], g

    def forward(self, x, training=False, rng=None):
        if x.ndim != 3 or x.shape[2] != self.n_in:
            raise ShapeError(f"lstm expects (batch, time, {self.n_in}), got {x.shape}")
        b, T, _ = x.shape
        h = self.n_hidden
        act = self.activation
        W, bias = self.params["W"], self.params["b"]
        W_s = W[:h]
        # time-major buffers keep every per-step slice contiguous
        A = np.ascontiguousarray(x.transpose(1, 0, 2)) @ W[h:] + bias
        Z = np.empty_like(A)  # activated gates i, f, o, candidate
        C = np.zeros((T + 1, b, h))
        S = np.zeros((T + 1, b, h))
        AC = np.empty((T, b, h))
        for t in range(T):
            a = A[t]
            a += S[t] @ W_s
            z = Z[t]
            z[:, :3 * h] = sigmoid(a[:, :3 * h])
            z[:, 3 * h:] = activate(act, a[:, 3 * h:])
            c = C[t + 1]
            np.multiply(z[:, h:2 * h], C[t], out=c)
            c += z[:, :h] * z[:, 3 * h:]
            AC[t] = activate(act, c)
            np.multiply(z[:, 2 * h:3 * h], AC[t], out=S[t + 1])
        if not np.all(np.isfinite(S[T])):
            raise NumericError("lstm state became non-finite")
        self._cache = (x, A, Z, C, S, AC)
        if self.return_sequences:
            return S[1:].transpose(1, 0, 2)
        return S[T]

    def backward(self, grad):
        x, A, Z, C, S, AC = self._cache
        b, T, _ = x.shape
        h = self.n_hidden
        act = self.activation
        W = self.params["W"]
        W_sT = np.ascontiguousarray(W[:h].T)
        if self.return_sequences:
            dS = np.ascontiguousarray(grad.transpose(1, 0, 2))
        else:
            dS = None
        dA = np.empty_like(A)
        ds = np.zeros((b, h))
        dc = np.zeros((b, h))
        for t in range(T - 1, -1, -1):
            z = Z[t]
            i, f, o, g = z[:, :h], z[:, h:2 * h], z[:, 2 * h:3 * h], z[:, 3 * h:]
            if dS is not None:
                ds += dS[t]
            elif t == T - 1:
                ds += grad
            dc += ds * o * activation_grad(act, C[t + 1], AC[t])
            da = dA[t]
            da[:, :h] = dc * g
            da[:, h:2 * h] = dc * C[t]
            da[:, 2 * h:3 * h] = ds * AC[t]
            da[:, :3 * h] *= z[:, :3 * h] * (1.0 - z[:, :3 * h])
            da[:, 3 * h:] = dc * i
            if act != "linear":
                da[:, 3 * h:] *= activation_grad(act, A[t, :, 3 * h:], g)
            dc *= f
            ds = da @ W_sT
        dA2 = dA.reshape(-1, 4 * h)
        dW_s = S[:T].reshape(-1, h).T @ dA2
        dW_x = x.transpose(1, 0, 2).reshape(-1, self.n_in).T @ dA2
        self.grads = {"W": np.concatenate([dW_s, dW_x], axis=0), "b": dA2.sum(axis=0)}
        return (dA @ W[h:].T).transpose(1, 0, 2)

    def output_shape(self, input_shape):
        t, _ = input_shape
        return (t, self.n_hidden) if self.return_sequences else (self.n_hidden,)


def lstm_step(cell: LSTM, x_t, s_prev, c_prev):
    """One time step of ``cell`` on a single sample; returns ``(s_t, c_t)``."""
    x_t, s_prev, c_prev = (np.atleast_1d(np.asarray(v, dtype=np.float64)) for v in (x_t, s_prev, c_prev))
    h = cell.n_hidden
    if x_t.shape != (cell.n_in,) or s_prev.shape != (h,) or c_prev.shape != (h,):
        raise ShapeError("x_t, s_prev and c_prev do not match the cell")
    z = np.concatenate([s_prev, x_t])[None, :]
    a = z @ cell.params["W"] + cell.params["b"]
    i, f, o, g = cell._step(a)
    c = f * c_prev + i * g
    s = o * activate(cell.activation, c)
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(c))):
        raise NumericError("lstm step produced non-finite values")
    return s[0], c[0]
