"""A reduced experiment written to disk: sweep, tuning and report files."""

import sys
import tempfile
from pathlib import Path

from pso_forecast.experiment import BaselinePreset, RunConfig, run_baseline_sweep, run_tuning
from pso_forecast.pso import PsoConfig
from pso_forecast.report import emit_report, load_results

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="pso_forecast_"))
cfg = RunConfig(families=("mlp", "cnn"), hl_values=(2, 3, 4), baseline=BaselinePreset(epochs=5),
                pso=PsoConfig(n_particles=3, generations=1), fast_search=True, search_epoch_cap=5,
                out=str(out))

run_baseline_sweep(cfg)
run_tuning(cfg)
for path in emit_report(load_results(out), out, cfg):
    print(path)

print((out / "report" / "daily" / "mape_table.csv").read_text())
