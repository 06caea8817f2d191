"""The three network families, trained briefly on the daily scenario."""

import time

import numpy as np

from pso_forecast.metrics import evaluate_model
from pso_forecast.nn import ModelSpec, TrainConfig, build_model, train
from pso_forecast.pipeline import clean_and_select, load_bundled_slice, make_scenario

ds = make_scenario(clean_and_select(load_bundled_slice()), "daily", lookback=24)
window = ds.train_x.shape[1:]

for family, activation in (("mlp", "relu"), ("lstm", "tanh"), ("cnn", "relu")):
    model = build_model(ModelSpec(family, hidden_layers=2, neurons=16, activation=activation), window, seed=1)
    print(model)
    t0 = time.perf_counter()
    result = train(model, ds, TrainConfig(loss="mse", optimizer="adam", batch_size=64, epochs=5, seed=1))
    report = evaluate_model(model, ds, label=family.upper())
    print(f"  loss per epoch {np.round(result.history, 5)}")
    print(f"  test MAPE {report.mape_percent:.2f}%  RMSE {report.rmse_normalized:.4f}"
          f"  ({time.perf_counter() - t0:.1f}s)")
