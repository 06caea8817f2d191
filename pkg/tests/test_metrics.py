import math

import numpy as np
import pytest

from pso_forecast.errors import ShapeError, UndefinedMetricError
from pso_forecast.metrics import MetricsReport, evaluate_predictions, mape, mape_details, rmse
from pso_forecast.pipeline import make_scenario

from conftest import synthetic_matrix


def loop_mape(actual, predicted):
    total, count = 0.0, 0
    for a, p in zip(actual, predicted):
        if a != 0:
            total += abs(a - p) / abs(a)
            count += 1
    return 100.0 * total / count


def loop_rmse(actual, predicted):
    total = 0.0
    for a, p in zip(actual, predicted):
        total += (a - p) ** 2
    return math.sqrt(total / len(actual))


class TestMape:
    def test_identical(self):
        assert mape([3.0, 4.0], [3.0, 4.0]) == 0.0

    def test_hand_case(self):
        assert round(mape([100, 200, 400], [110, 190, 420]), 6) == 6.666667

    def test_zero_target_skipped(self):
        value, used, skipped = mape_details([0, 100], [5, 110])
        assert value == pytest.approx(10.0, abs=1e-12)
        assert (used, skipped) == (1, 1)

    def test_all_zero(self):
        with pytest.raises(UndefinedMetricError):
            mape([0.0, 0.0], [1.0, 2.0])

    def test_asymmetric(self):
        a, p = [100.0], [50.0]
        assert mape(a, p) == 50.0 and mape(p, a) == 100.0

    def test_scale_invariant(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            a, p = rng.uniform(1, 10, 20), rng.uniform(1, 10, 20)
            k = rng.uniform(0.01, 100)
            assert mape(k * a, k * p) == pytest.approx(mape(a, p), rel=1e-12)


class TestRmse:
    def test_identical(self):
        assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_hand_cases(self):
        assert round(rmse([0, 0], [3, 4]), 6) == round(math.sqrt(12.5), 6) == 3.535534
        assert rmse([0.0], [5.0]) == 5.0

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            rmse([1.0, 2.0], [1.0])
        with pytest.raises(ShapeError):
            rmse([], [])

    def test_symmetric_and_homogeneous(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            a, p = rng.normal(size=15), rng.normal(size=15)
            k = rng.uniform(0.01, 100)
            assert rmse(a, p) == rmse(p, a)
            assert rmse(k * a, k * p) == pytest.approx(k * rmse(a, p), rel=1e-12)


def test_loop_oracle_agreement():
    rng = np.random.default_rng(2)
    for _ in range(100):
        n = int(rng.integers(1, 50))
        a = rng.uniform(-50, 50, n)
        a[rng.random(n) < 0.1] = 0.0
        a[0] = rng.uniform(1, 50)
        p = a + rng.normal(scale=5, size=n)
        assert abs(mape(a, p) - loop_mape(a, p)) <= 1e-9
        assert abs(rmse(a, p) - loop_rmse(a, p)) <= 1e-9


@pytest.fixture(scope="module")
def dataset():
    return make_scenario(synthetic_matrix(1200, seed=4), "daily", lookback=6)


class TestEvaluate:
    def test_perfect_predictor(self, dataset):
        report = evaluate_predictions(dataset.test_y, dataset, "perfect")
        assert report.rmse_normalized == 0.0
        assert report.mape_percent == pytest.approx(0.0, abs=1e-9)
        assert report.n_points == 24

    def test_constant_predictor(self, dataset):
        mean = float(np.mean(dataset.train_y))
        report = evaluate_predictions(np.full(24, mean), dataset, "mean")
        assert report.rmse_normalized == pytest.approx(loop_rmse(dataset.test_y, [mean] * 24), abs=1e-12)
        raw_mean = dataset.normalizer.inverse_column(np.array([mean]))[0]
        assert report.mape_percent == pytest.approx(loop_mape(dataset.test_y_raw, [raw_mean] * 24), rel=1e-12)

    def test_report_row(self):
        row = MetricsReport("PSO-LSTM", "daily", 5.5, 0.01, 24, 1, hl=3, seed=7).row()
        assert row == ["PSO-LSTM", "daily", "3", "5.5000000000", "0.0100000000", "24", "1", "7"]

    def test_report_invariants(self):
        with pytest.raises(ShapeError):
            MetricsReport("m", "daily", 1.0, 1.0, 0)
        with pytest.raises(ValueError):
            MetricsReport("m", "daily", -1.0, 1.0, 3)
