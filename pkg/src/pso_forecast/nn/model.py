"""Model specs, the three network families, training and checkpoints."""

from __future__ import annotations

import copy
import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DivergenceError, ShapeError, ValidationError
from .layers import ACTIVATIONS, LSTM, Conv1D, Dense, Dropout, Flatten, Layer, MaxPool1D
from .losses import LOSSES, loss as loss_fn
from .optimizers import DEFAULT_LR, OPTIMIZERS, make_optimizer

log = logging.getLogger(__name__)

FAMILIES = ("mlp", "lstm", "cnn")
HIDDEN_LAYER_RANGE = (2, 10)
NEURON_RANGE = (1, 100)
EPOCH_RANGE = (5, 100)
SEARCH_BATCH_SIZES = (32, 64, 128)
BASELINE_BATCH_SIZE = 72
DROPOUT_RATE = 0.2


@dataclass(frozen=True)
class ModelSpec:
    family: str
    hidden_layers: int
    neurons: int
    activation: str
    dropout_rate: float = DROPOUT_RATE
    cnn_filters: int = 64
    cnn_kernel: int = 2
    pool_size: int = 1
    cnn_dense_dropout: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown model family {self.family!r}")
        lo, hi = HIDDEN_LAYER_RANGE
        if not lo <= self.hidden_layers <= hi:
            raise ValidationError(f"hidden_layers={self.hidden_layers} outside [{lo}, {hi}]")
        lo, hi = NEURON_RANGE
        if not lo <= self.neurons <= hi:
            raise ValidationError(f"neurons={self.neurons} outside [{lo}, {hi}]")
        if self.activation not in ACTIVATIONS:
            raise ValidationError(f"unknown activation {self.activation!r}")
        if self.dropout_rate != DROPOUT_RATE:
            raise ValidationError(f"dropout is fixed at {DROPOUT_RATE}")


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "mse"
    optimizer: str = "adam"
    batch_size: int = 32
    epochs: int = 100
    learning_rate: float = DEFAULT_LR
    seed: int = 0

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValidationError(f"unknown loss {self.loss!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ValidationError(f"unknown optimizer {self.optimizer!r}")
        if self.batch_size not in SEARCH_BATCH_SIZES + (BASELINE_BATCH_SIZE,):
            raise ValidationError(f"batch_size={self.batch_size} not in {SEARCH_BATCH_SIZES} or {BASELINE_BATCH_SIZE}")
        lo, hi = EPOCH_RANGE
        if not lo <= self.epochs <= hi:
            raise ValidationError(f"epochs={self.epochs} outside [{lo}, {hi}]")
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be positive")


class Network:
    """A stack of layers producing one output per sample."""

    def __init__(self, layers: list[Layer], spec: ModelSpec | None = None, input_shape=None, seed=0):
        self.layers = layers
        self.spec = spec
        self.input_shape = tuple(input_shape) if input_shape is not None else None
        self.seed = seed

    def forward(self, x, training=False, rng=None):
        for layer in self.layers:
            x = layer.forward(x, training=training, rng=rng)
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def named_params(self):
        for k, layer in enumerate(self.layers):
            for name, p in layer.params.items():
                yield f"{k}.{layer.name}.{name}", p

    def param_list(self):
        return [p for layer in self.layers for p in layer.params.values()]

    def grad_list(self):
        return [layer.grads[name] for layer in self.layers for name in layer.params]

    def n_params(self):
        return sum(layer.n_params() for layer in self.layers)

    def copy(self):
        return copy.deepcopy(self)

    def __repr__(self):
        body = ", ".join(layer.name for layer in self.layers)
        return f"Network([{body}], params={self.n_params()})"


def build_model(spec: ModelSpec, input_shape, seed=0) -> Network:
    """Instantiate ``spec`` for inputs of ``input_shape`` (without the batch axis).

    ``input_shape`` is ``(lookback, features)``; a plain ``(features,)`` is
    accepted for the MLP. Weights are Glorot-uniform, biases zero.
    """
    if not isinstance(spec, ModelSpec):
        raise ValidationError("build_model needs a ModelSpec")
    input_shape = tuple(int(d) for d in input_shape)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    n, act, hl = spec.neurons, spec.activation, spec.hidden_layers
    layers: list[Layer] = []

    if spec.family == "mlp":
        n_in = int(np.prod(input_shape))
        if len(input_shape) > 1:
            layers.append(Flatten())
        for _ in range(hl):
            layers += [Dense(n_in, n, act, rng=rng), Dropout(spec.dropout_rate)]
            n_in = n
        layers.append(Dense(n_in, 1, "linear", rng=rng))

    elif spec.family == "lstm":
        if len(input_shape) != 2:
            raise ValidationError("lstm input must be (lookback, features)")
        n_in = input_shape[1]
        for k in range(hl):
            layers += [LSTM(n_in, n, activation=act, return_sequences=k < hl - 1, rng=rng),
                       Dropout(spec.dropout_rate)]
            n_in = n
        layers.append(Dense(n_in, 1, "linear", rng=rng))

    else:  # cnn
        if len(input_shape) != 2:
            raise ValidationError("cnn input must be (lookback, features)")
        lookback, channels = input_shape
        if lookback < spec.cnn_kernel:
            raise ValidationError(f"lookback {lookback} shorter than kernel width {spec.cnn_kernel}")
        conv = Conv1D(channels, spec.cnn_filters, spec.cnn_kernel, "relu", rng=rng)
        pool = MaxPool1D(spec.pool_size)
        t, f = pool.output_shape(conv.output_shape(input_shape))
        layers += [conv, pool, Dropout(spec.dropout_rate), Flatten()]
        n_in = t * f
        for _ in range(hl - 1):
            layers.append(Dense(n_in, n, act, rng=rng))
            if spec.cnn_dense_dropout:
                layers.append(Dropout(spec.dropout_rate))
            n_in = n
        layers.append(Dense(n_in, 1, "linear", rng=rng))

    return Network(layers, spec, input_shape, seed)


def _check_input(model: Network, x):
    x = np.asarray(x, dtype=np.float64)
    if model.input_shape is not None and x.shape[1:] != model.input_shape:
        raise ShapeError(f"model expects samples of shape {model.input_shape}, got {x.shape[1:]}")
    return x


@dataclass
class TrainResult:
    model: Network
    history: np.ndarray = field(repr=False)
    config: TrainConfig | None = None


def fit(model: Network, x, y, cfg: TrainConfig) -> TrainResult:
    """Mini-batch training of ``model`` in place on windows ``x`` and targets ``y``.

    Batches are drawn from a seeded permutation each epoch; the recorded loss
    of an epoch is the sample-weighted mean of its batch losses.
    """
    x = _check_input(model, x)
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    if len(x) == 0 or len(x) != len(y):
        raise ShapeError(f"need matching, nonempty inputs; got {len(x)} windows and {len(y)} targets")
    shuffle_seq, dropout_seq = np.random.SeedSequence([cfg.seed, 1]).spawn(2)
    shuffle_rng = np.random.default_rng(shuffle_seq)
    dropout_rng = np.random.default_rng(dropout_seq)
    opt = make_optimizer(cfg.optimizer, cfg.learning_rate)
    params = model.param_list()
    n = len(x)
    history = np.empty(cfg.epochs)
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            pred = model.forward(x[idx], training=True, rng=dropout_rng)
            value, grad = loss_fn(cfg.loss, pred, y[idx])
            if not np.isfinite(value):
                raise DivergenceError(epoch + 1)
            model.backward(grad)
            opt.step(params, model.grad_list())
            total += value * len(idx)
        history[epoch] = total / n
        if not np.isfinite(history[epoch]):
            raise DivergenceError(epoch + 1)
    if not all(np.all(np.isfinite(p)) for p in params):
        raise DivergenceError(cfg.epochs, "parameters became non-finite")
    return TrainResult(model, history, cfg)


def train(model: Network, dataset, cfg: TrainConfig) -> TrainResult:
    """Train on the training windows of a :class:`ScenarioDataset`."""
    return fit(model, dataset.train_x, dataset.train_y, cfg)


def predict(model: Network, x, batch_size=4096) -> np.ndarray:
    """Deterministic forward pass (dropout off); one prediction per window."""
    x = _check_input(model, x)
    out = [model.forward(x[i:i + batch_size], training=False)[:, 0] for i in range(0, len(x), batch_size)]
    return np.concatenate(out) if out else np.empty(0)


def save_model(model: Network, path) -> None:
    """Write ``model`` as an ``.npz`` container: a JSON header plus named arrays."""
    header = {
        "spec": asdict(model.spec) if model.spec else None,
        "input_shape": list(model.input_shape) if model.input_shape else None,
        "seed": model.seed,
        "params": [name for name, _ in model.named_params()],
    }
    arrays = dict(model.named_params())
    with Path(path).open("wb") as fh:
        np.savez(fh, __header__=np.array(json.dumps(header, sort_keys=True)), **arrays)


def load_model(path) -> Network:
    with np.load(Path(path), allow_pickle=False) as data:
        header = json.loads(str(data["__header__"]))
        if header["spec"] is None:
            raise ValidationError("checkpoint carries no model spec")
        model = build_model(ModelSpec(**header["spec"]), header["input_shape"], header["seed"])
        for name, p in model.named_params():
            stored = data[name]
            if stored.shape != p.shape:
                raise ShapeError(f"{name}: checkpoint shape {stored.shape} != model shape {p.shape}")
            p[...] = stored
    return model


def write_history_csv(history, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "loss"])
        for k, value in enumerate(history, start=1):
            writer.writerow([k, repr(float(value))])
