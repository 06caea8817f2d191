"""Adam and RMSprop parameter updates."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError, ValidationError

OPTIMIZERS = ("adam", "rmsprop")
DEFAULT_LR = 0.001


class Optimizer:
    def __init__(self, lr=DEFAULT_LR):
        if not lr > 0:
            raise ValidationError("learning rate must be positive")
        self.lr = lr
        self.state: dict[int, tuple] = {}

    def step(self, params, grads):
        """Update every array in ``params`` in place."""
        if len(params) != len(grads):
            raise ShapeError("one gradient per parameter required")
        for k, (p, g) in enumerate(zip(params, grads)):
            if p.shape != g.shape:
                raise ShapeError(f"parameter {k}: shape {p.shape} but gradient {g.shape}")
            self._update(k, p, g)

    def _update(self, k, p, g):
        raise NotImplementedError


class Adam(Optimizer):
    def __init__(self, lr=DEFAULT_LR, beta1=0.9, beta2=0.999, eps=1e-8):
        super().__init__(lr)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def _update(self, k, p, g):
        m, v, t = self.state.get(k) or (np.zeros_like(p), np.zeros_like(p), 0)
        t += 1
        m *= self.beta1
        m += (1.0 - self.beta1) * g
        v *= self.beta2
        v += (1.0 - self.beta2) * g * g
        m_hat = m / (1.0 - self.beta1 ** t)
        v_hat = v / (1.0 - self.beta2 ** t)
        p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        self.state[k] = (m, v, t)


class RMSprop(Optimizer):
    """``v = rho v + (1 - rho) g^2``; ``p -= lr g / sqrt(v + eps)``."""

    def __init__(self, lr=DEFAULT_LR, rho=0.9, eps=1e-8):
        super().__init__(lr)
        self.rho, self.eps = rho, eps

    def _update(self, k, p, g):
        v = self.state.get(k)
        if v is None:
            v = np.zeros_like(p)
        v *= self.rho
        v += (1.0 - self.rho) * g * g
        p -= self.lr * g / np.sqrt(v + self.eps)
        self.state[k] = v


def make_optimizer(kind, lr=DEFAULT_LR) -> Optimizer:
    if kind == "adam":
        return Adam(lr)
    if kind == "rmsprop":
        return RMSprop(lr)
    raise ValidationError(f"unknown optimizer {kind!r}; expected one of {OPTIMIZERS}")
