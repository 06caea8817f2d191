"""A small PSO search for an MLP on the bundled slice.

The search scores each decoded configuration by its RMSE on the last 10% of
the training windows, then retrains the winner on all training windows.
"""

from pso_forecast.experiment import RunConfig, load_datasets, tune_one
from pso_forecast.pso import PsoConfig

cfg = RunConfig(pso=PsoConfig(n_particles=4, generations=2), fast_search=True, search_epoch_cap=5)
dataset = load_datasets(cfg)["daily"]

outcome = tune_one(cfg, "mlp", dataset)
print("gbest per generation:", [round(t, 5) for t in outcome.pso.trace])
print("evaluations:", outcome.pso.n_evaluations)
for name, value in outcome.values.items():
    print(f"  {name:14s} {value}")
print(f"test MAPE {outcome.report.mape_percent:.2f}%  RMSE {outcome.report.rmse_normalized:.4f}")
