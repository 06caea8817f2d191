"""The seven-dimensional hyperparameter search space.

Particles live in the unit box ``[0, 1]^7``. Integer dimensions decode by
rounding ``lo + c * (hi - lo)`` half-up; categorical dimensions pick option
``min(floor(c * k), k - 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ShapeError, ValidationError
from .nn.model import ModelSpec, TrainConfig

CONTINUOUS_INTEGER = "continuous_integer"
CATEGORICAL = "categorical"


@dataclass(frozen=True)
class DimensionDef:
    name: str
    kind: str
    bounds: tuple | None = None
    options: tuple | None = None

    def __post_init__(self):
        if self.kind == CONTINUOUS_INTEGER:
            if self.bounds is None or len(self.bounds) != 2 or not self.bounds[0] < self.bounds[1]:
                raise ValidationError(f"{self.name}: bounds must be (lo, hi) with lo < hi")
        elif self.kind == CATEGORICAL:
            if not self.options:
                raise ValidationError(f"{self.name}: categorical dimension needs options")
            object.__setattr__(self, "options", tuple(self.options))
        else:
            raise ValidationError(f"{self.name}: unknown kind {self.kind!r}")

    def decode(self, c: float):
        if self.kind == CONTINUOUS_INTEGER:
            lo, hi = self.bounds
            value = math.floor(lo + c * (hi - lo) + 0.5)
            return int(min(max(value, lo), hi))
        k = len(self.options)
        return self.options[min(int(math.floor(c * k)), k - 1)]

    def encode(self, value) -> float:
        """A coordinate in the middle of the cell that decodes to ``value``."""
        if self.kind == CONTINUOUS_INTEGER:
            lo, hi = self.bounds
            if not lo <= value <= hi:
                raise ValidationError(f"{self.name}={value} outside [{lo}, {hi}]")
            return (value - lo) / (hi - lo)
        k = len(self.options)
        return (self.options.index(value) + 0.5) / k

    def to_text(self) -> str:
        if self.kind == CONTINUOUS_INTEGER:
            return f"{self.bounds[0]},{self.bounds[1]}"
        return ",".join(str(o) for o in self.options)


class SearchSpace:
    """Ordered collection of :class:`DimensionDef`."""

    def __init__(self, dims):
        self.dims = tuple(dims)
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise ValidationError("dimension names must be unique")

    @classmethod
    def default(cls) -> "SearchSpace":
        return cls([
            DimensionDef("hidden_layers", CONTINUOUS_INTEGER, bounds=(2, 10)),
            DimensionDef("neurons", CONTINUOUS_INTEGER, bounds=(1, 100)),
            DimensionDef("activation", CATEGORICAL, options=("linear", "sigmoid", "relu")),
            DimensionDef("loss", CATEGORICAL, options=("mse", "mae")),
            DimensionDef("optimizer", CATEGORICAL, options=("adam", "rmsprop")),
            DimensionDef("batch_size", CATEGORICAL, options=(32, 64, 128)),
            DimensionDef("epochs", CONTINUOUS_INTEGER, bounds=(5, 100)),
        ])

    def __len__(self):
        return len(self.dims)

    def __iter__(self):
        return iter(self.dims)

    @property
    def names(self):
        return tuple(d.name for d in self.dims)

    def __eq__(self, other):
        return isinstance(other, SearchSpace) and self.dims == other.dims

    def to_dict(self) -> dict[str, str]:
        return {d.name: d.to_text() for d in self.dims}

    @classmethod
    def from_dict(cls, entries: dict[str, str]) -> "SearchSpace":
        """Rebuild from ``{name: "lo,hi" | "opt1,opt2,..."}``, keeping default kinds."""
        default = {d.name: d for d in cls.default()}
        dims = []
        for name, text in entries.items():
            if name not in default:
                raise ValidationError(f"unknown search dimension {name!r}")
            parts = [p.strip() for p in str(text).split(",") if p.strip()]
            base = default[name]
            if base.kind == CONTINUOUS_INTEGER:
                if len(parts) != 2:
                    raise ValidationError(f"{name}: expected 'lo,hi', got {text!r}")
                dims.append(DimensionDef(name, base.kind, bounds=(int(parts[0]), int(parts[1]))))
            else:
                cast = int if isinstance(base.options[0], int) else str
                dims.append(DimensionDef(name, base.kind, options=tuple(cast(p) for p in parts)))
        order = [d.name for d in cls.default()]
        if [d.name for d in dims] != order:
            raise ValidationError(f"search space must list exactly {order} in this order")
        return cls(dims)


def clamp(v) -> np.ndarray:
    """Project a position into the unit box; NaN or infinite coordinates are an error."""
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise NumericError(f"non-finite coordinate in {v}")
    return np.clip(v, 0.0, 1.0)


def sample_uniform(space: SearchSpace | int, rng: np.random.Generator) -> np.ndarray:
    n = space if isinstance(space, int) else len(space)
    return rng.random(n)


def decode_values(v, space: SearchSpace) -> dict:
    """Map a unit-box position to ``{dimension name: value}``."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (len(space),):
        raise ShapeError(f"expected a {len(space)}-vector, got shape {v.shape}")
    v = clamp(v)
    return {d.name: d.decode(float(c)) for d, c in zip(space, v)}


def encode_values(values: dict, space: SearchSpace) -> np.ndarray:
    return np.array([d.encode(values[d.name]) for d in space])


def to_configs(values: dict, family: str, seed: int = 0, learning_rate: float | None = None):
    spec = ModelSpec(family, values["hidden_layers"], values["neurons"], values["activation"])
    extra = {} if learning_rate is None else {"learning_rate": learning_rate}
    cfg = TrainConfig(loss=values["loss"], optimizer=values["optimizer"], batch_size=values["batch_size"],
                      epochs=values["epochs"], seed=seed, **extra)
    return spec, cfg


def decode(v, space: SearchSpace, family: str = "mlp", seed: int = 0,
           learning_rate: float | None = None) -> tuple[ModelSpec, TrainConfig]:
    return to_configs(decode_values(v, space), family, seed, learning_rate)


def format_config(values: dict, space: SearchSpace | None = None) -> str:
    """Stable ``key=value`` rendering, in search-space order."""
    names = space.names if space is not None else tuple(values)
    return " ".join(f"{k}={values[k]}" for k in names)
