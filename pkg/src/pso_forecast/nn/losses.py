"""Mean squared and mean absolute error with their gradients."""

import numpy as np

from ..errors import ShapeError, ValidationError

LOSSES = ("mse", "mae")


def loss(kind, pred, target):
    """Return ``(value, d value / d pred)``; the mean runs over all elements."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    n = diff.size
    if kind == "mse":
        with np.errstate(over="ignore"):  # overflow surfaces as inf and is handled as divergence
            return float(np.mean(diff * diff)), 2.0 * diff / n
    if kind == "mae":
        return float(np.mean(np.abs(diff))), np.sign(diff) / n
    raise ValidationError(f"unknown loss {kind!r}; expected one of {LOSSES}")
