"""Forecast error metrics and per-model evaluation reports."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, UndefinedMetricError

# Column order of report rows written by the runner.
REPORT_FIELDS = ("model", "scenario", "hl", "mape_percent", "rmse_normalized",
                 "n_points", "skipped_zero_targets", "seed")


def _pair(actual, predicted):
    a = np.asarray(actual, dtype=np.float64).ravel()
    p = np.asarray(predicted, dtype=np.float64).ravel()
    if a.shape != p.shape:
        raise ShapeError(f"length mismatch: {a.size} actual vs {p.size} predicted")
    if a.size == 0:
        raise ShapeError("metrics need at least one point")
    return a, p


def mape_details(actual, predicted) -> tuple[float, int, int]:
    """``(mape_percent, points_used, zero_targets_skipped)``.

    Points whose actual value is exactly zero have no defined percentage
    error and are left out of both the sum and the count.
    """
    a, p = _pair(actual, predicted)
    keep = a != 0.0
    used = int(keep.sum())
    if used == 0:
        raise UndefinedMetricError("every target is zero; MAPE is undefined")
    value = 100.0 / used * np.sum(np.abs(a[keep] - p[keep]) / np.abs(a[keep]))
    return float(value), used, a.size - used


def mape(actual, predicted) -> float:
    """Mean absolute percentage error, in percent."""
    return mape_details(actual, predicted)[0]


def rmse(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    return float(np.sqrt(np.mean((a - p) ** 2)))


@dataclass(frozen=True)
class MetricsReport:
    """Test-split scores of one model.

    MAPE is computed on pm2.5 in µg/m³, RMSE on the normalized [0, 1] scale;
    the ``*_alt`` fields hold the same metrics on the opposite scale.
    """

    model_label: str
    scenario: str
    mape_percent: float
    rmse_normalized: float
    n_points: int
    skipped_zero_targets: int = 0
    hl: int | None = None
    seed: int | None = None
    rmse_raw: float | None = None
    mape_normalized: float | None = None

    def __post_init__(self):
        if self.n_points <= 0:
            raise ShapeError("a report needs at least one point")
        if self.mape_percent < 0 or self.rmse_normalized < 0:
            raise ValueError("metrics are non-negative")

    def row(self) -> list[str]:
        return [self.model_label, self.scenario, "" if self.hl is None else str(self.hl),
                f"{self.mape_percent:.10f}", f"{self.rmse_normalized:.10f}", str(self.n_points),
                str(self.skipped_zero_targets), "" if self.seed is None else str(self.seed)]


def evaluate_predictions(pred_normalized, dataset, label, hl=None, seed=None) -> MetricsReport:
    """Score normalized predictions for ``dataset``'s test split."""
    pred = np.asarray(pred_normalized, dtype=np.float64)
    rm = rmse(dataset.test_y, pred)
    pred_raw = dataset.normalizer.inverse_column(pred)
    value, used, skipped = mape_details(dataset.test_y_raw, pred_raw)
    try:
        mape_norm = mape(dataset.test_y, pred)
    except UndefinedMetricError:
        mape_norm = None
    return MetricsReport(label, dataset.scenario, value, rm, used, skipped, hl, seed,
                         rmse_raw=rmse(dataset.test_y_raw, pred_raw), mape_normalized=mape_norm)


def evaluate_model(model, dataset, label="model", hl=None, seed=None) -> MetricsReport:
    from .nn.model import predict

    return evaluate_predictions(predict(model, dataset.test_x), dataset, label, hl, seed)
