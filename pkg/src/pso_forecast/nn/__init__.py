"""Dense, LSTM and 1-D convolutional networks on plain numpy arrays."""

from .layers import (
    ACTIVATIONS,
    LSTM,
    Conv1D,
    Dense,
    Dropout,
    Flatten,
    MaxPool1D,
    conv1d_forward,
    dense_forward,
    dropout_apply,
    lstm_step,
    sigmoid,
)
from .losses import LOSSES, loss
from .model import (
    FAMILIES,
    ModelSpec,
    Network,
    TrainConfig,
    TrainResult,
    build_model,
    fit,
    load_model,
    predict,
    save_model,
    train,
    write_history_csv,
)
from .optimizers import OPTIMIZERS, Adam, RMSprop, make_optimizer
