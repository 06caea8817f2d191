"""Table and figure output for finished runs.

Per scenario the report holds ``mape_table.csv`` and ``rmse_table.csv``
(models as rows, HL-2 ... HL-10 as columns) and ``comparison.svg``; next to
the scenario folders sit ``tuned_configs.csv`` and ``run_metadata.json``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ValidationError
from .experiment import (
    BASELINE_ACTIVATIONS,
    BASELINE_FILE,
    TIMINGS_FILE,
    TUNED_CONFIG_FIELDS,
    TUNED_CONFIGS_FILE,
    TUNED_FILE,
    TUNED_LABELS,
    RunConfig,
    check_writable,
)
from .pipeline import REFERENCE_MISSING_COUNT, REFERENCE_RECORD_COUNT, SCENARIOS, TEST_LENGTHS

HL_COLUMNS = tuple(range(2, 11))
SCALE_NOTE = ("MAPE is computed on pm2.5 in ug/m3 (zero targets skipped); RMSE on the min-max normalized "
              "[0, 1] scale.")

# Published reference values for the tuned models; logged, never asserted.
REFERENCE = {
    ("PSO-LSTM", "monthly"): (3, 8.4576, 0.0250), ("PSO-CNN", "monthly"): (4, 8.5281, 0.0346),
    ("PSO-MLP", "monthly"): (3, 9.0930, 0.0259),
    ("PSO-LSTM", "weekly"): (3, 8.6379, 0.0232), ("PSO-CNN", "weekly"): (4, 8.6987, 0.0362),
    ("PSO-MLP", "weekly"): (3, 9.2903, 0.0301),
    ("PSO-LSTM", "daily"): (3, 5.4676, 0.0023), ("PSO-CNN", "daily"): (4, 6.3742, 0.0031),
    ("PSO-MLP", "daily"): (3, 6.0990, 0.0031),
}
REFERENCE_TUNED_CONFIGS = {
    "lstm": dict(hidden_layers=3, neurons=24, activation="sigmoid", loss="mse", optimizer="adam",
                 batch_size=32, epochs=46),
    "cnn": dict(hidden_layers=4, neurons=41, activation="relu", loss="mae", optimizer="rmsprop",
                batch_size=32, epochs=60),
    "mlp": dict(hidden_layers=3, neurons=61, activation="linear", loss="mse", optimizer="rmsprop",
                batch_size=64, epochs=68),
}

DECISIONS = (
    "test tails: daily 24, weekly 168, monthly 720 hourly targets",
    "normalizer fitted on training rows only; test rows clipped into [0, 1]",
    "rows with missing pm2.5 dropped; windows span the resulting gaps",
    "PSO on the unit box; |velocity| clamped into [0, 1]; inertia 1.0; phi1=1.5 personal, phi2=2.0 global",
    "integer dimensions rounded half-up; categorical index = min(floor(c*k), k-1)",
    "PSO objective: validation RMSE on the last 10% of training windows",
    "generational schedule n*(1+generations) governs the evaluation count",
    "one fixed chronological split per scenario shared by all HL values",
    "baseline activations: " + ", ".join(f"{k}={v}" for k, v in BASELINE_ACTIVATIONS.items()),
    "LSTM activation hyperparameter replaces tanh in the candidate and cell-output paths",
    "Glorot-uniform weights, zero biases, learning rate 0.001",
)


@dataclass
class ExperimentResult:
    baseline: list[dict] = field(default_factory=list)
    tuned: list[dict] = field(default_factory=list)
    tuned_configs: list[dict] = field(default_factory=list)
    traces: dict[str, list[dict]] = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def __bool__(self):
        return bool(self.baseline or self.tuned)

    @property
    def scenarios(self):
        seen = {r["scenario"] for r in self.baseline + self.tuned}
        return [s for s in SCENARIOS if s in seen]


def _read_rows(path):
    path = Path(path)
    if not path.exists():
        return []
    with path.open(newline="") as fh:
        return list(csv.DictReader(row for row in fh if not row.startswith("#")))


def load_results(outdir) -> ExperimentResult:
    outdir = Path(outdir)
    traces = {p.stem[len("pso_trace_"):]: _read_rows(p) for p in sorted(outdir.glob("pso_trace_*.csv"))}
    timings = json.loads((outdir / TIMINGS_FILE).read_text()) if (outdir / TIMINGS_FILE).exists() else {}
    return ExperimentResult(_read_rows(outdir / BASELINE_FILE), _read_rows(outdir / TUNED_FILE),
                            _read_rows(outdir / TUNED_CONFIGS_FILE), traces, timings)


def _fmt(text, digits):
    try:
        value = float(text)
    except (TypeError, ValueError):
        return "-"
    return "nan" if math.isnan(value) else f"{value:.{digits}f}"


def _table(result, scenario, metric, digits, families):
    header = ["model"] + [f"HL-{h}" for h in HL_COLUMNS]
    rows = []
    for fam in families:
        cells = {int(r["hl"]): r[metric] for r in result.baseline
                 if r["scenario"] == scenario and r["model"] == fam.upper()}
        if cells:
            rows.append([fam.upper()] + [_fmt(cells[h], digits) if h in cells else "-" for h in HL_COLUMNS])
    for fam in families:
        label = TUNED_LABELS[fam]
        for r in result.tuned:
            if r["scenario"] == scenario and r["model"] == label:
                hl = int(r["hl"])
                rows.append([label] + [_fmt(r[metric], digits) if h == hl else "-" for h in HL_COLUMNS])
    return header, rows


def _families(result):
    fams = []
    for r in result.baseline + result.tuned:
        label = r["model"]
        fam = next((f for f, lab in TUNED_LABELS.items() if lab == label), label.lower())
        if fam not in fams:
            fams.append(fam)
    order = ("lstm", "cnn", "mlp")
    return [f for f in order if f in fams]


def _reference_lines(scenario, metric):
    lines = []
    for label in TUNED_LABELS.values():
        ref = REFERENCE.get((label, scenario))
        if ref:
            hl, mape_ref, rmse_ref = ref
            value = mape_ref if metric == "mape_percent" else rmse_ref
            lines.append(f"# reference: {label} HL-{hl} {scenario} = {value}")
    return lines


def write_table(path, header, rows, comments=()):
    with Path(path).open("w", newline="") as fh:
        for line in comments:
            fh.write(line + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _best(result, scenario, family, metric):
    vals = [float(r[metric]) for r in result.baseline
            if r["scenario"] == scenario and r["model"] == family.upper()]
    vals = [v for v in vals if math.isfinite(v)]
    return min(vals) if vals else math.nan


def _tuned(result, scenario, family, metric):
    for r in result.tuned:
        if r["scenario"] == scenario and r["model"] == TUNED_LABELS[family]:
            return float(r[metric])
    return math.nan


def comparison_data(result, scenario, families):
    """Bar heights of the comparison chart: best baseline vs tuned, per family."""
    return {metric: {fam: [_best(result, scenario, fam, metric), _tuned(result, scenario, fam, metric)]
                     for fam in families}
            for metric in ("mape_percent", "rmse_normalized")}


def write_comparison_svg(path, scenario, data) -> str:
    """Grouped bars for MAPE and RMSE; returns the SHA-256 of the plotted values."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    families = list(next(iter(data.values())).keys())
    with matplotlib.rc_context({"svg.hashsalt": "pso-forecast", "svg.fonttype": "none"}):
        fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
        x = np.arange(len(families))
        for ax, (metric, title) in zip(axes, (("mape_percent", "MAPE (%)"), ("rmse_normalized", "RMSE"))):
            base = [data[metric][f][0] for f in families]
            tuned = [data[metric][f][1] for f in families]
            ax.bar(x - 0.2, np.nan_to_num(base), 0.4, label="best baseline HL")
            ax.bar(x + 0.2, np.nan_to_num(tuned), 0.4, label="PSO-tuned")
            ax.set_xticks(x, [f.upper() for f in families])
            ax.set_title(f"{title}, {scenario}")
        axes[0].legend(loc="best", fontsize="small")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    payload = json.dumps(data, sort_keys=True, default=lambda v: None).encode()
    return hashlib.sha256(payload).hexdigest()


def build_metadata(result, cfg: RunConfig | None, svg_hashes) -> dict:
    import matplotlib

    meta = {
        "package_version": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "matplotlib": matplotlib.__version__,
        "platform": platform.platform(),
        "metric_scales": SCALE_NOTE,
        "decisions": list(DECISIONS),
        "seeding": "cell seed = first 63 bits of sha256('master|family|scenario|HL'); "
                   "search seeds also hash the decoded configuration",
        "test_lengths": TEST_LENGTHS,
        "reference_counts": {"records": REFERENCE_RECORD_COUNT, "missing_pm25": REFERENCE_MISSING_COUNT},
        "reference_tuned_metrics": {f"{k[0]}/{k[1]}": {"hl": v[0], "mape": v[1], "rmse": v[2]}
                                    for k, v in REFERENCE.items()},
        "reference_tuned_configs": REFERENCE_TUNED_CONFIGS,
        "svg_data_sha256": svg_hashes,
        "timings_seconds": result.timings,
    }
    if cfg is not None:
        meta["config"] = cfg.to_flat()
        meta["eval_budget_note"] = (f"PSO plans {cfg.pso.planned_evaluations} evaluations per search "
                                    f"({cfg.pso.n_particles} particles x (1 + {cfg.pso.generations}))")
        meta["fast_search"] = {"enabled": cfg.fast_search, "epoch_cap": cfg.search_epoch_cap}
    return meta


def emit_report(result: ExperimentResult, outdir, cfg: RunConfig | None = None) -> list[Path]:
    """Write tables, charts and metadata for ``result`` under ``outdir/report``."""
    if not result:
        raise ValidationError("no results to report")
    report_dir = check_writable(Path(outdir) / "report")
    families = _families(result)
    written, svg_hashes = [], {}
    for scenario in result.scenarios:
        sdir = report_dir / scenario
        sdir.mkdir(exist_ok=True)
        for metric, name, digits in (("mape_percent", "mape_table.csv", 4), ("rmse_normalized", "rmse_table.csv", 6)):
            header, rows = _table(result, scenario, metric, digits, families)
            comments = [f"# {scenario} scenario, {metric}", f"# {SCALE_NOTE}"] + _reference_lines(scenario, metric)
            write_table(sdir / name, header, rows, comments)
            written.append(sdir / name)
        svg = sdir / "comparison.svg"
        svg_hashes[scenario] = write_comparison_svg(svg, scenario, comparison_data(result, scenario, families))
        written.append(svg)

    path = report_dir / "tuned_configs.csv"
    rows = [[r.get(k, "") for k in TUNED_CONFIG_FIELDS] for r in result.tuned_configs]
    comments = ["# reference: " + ", ".join(
        f"{TUNED_LABELS[f]} " + " ".join(f"{k}={v}" for k, v in c.items()) for f, c in REFERENCE_TUNED_CONFIGS.items())]
    write_table(path, TUNED_CONFIG_FIELDS, rows, comments)
    written.append(path)

    path = report_dir / "run_metadata.json"
    path.write_text(json.dumps(build_metadata(result, cfg, svg_hashes), indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written


def table2_text(tuned_configs) -> str:
    """Plain-text rendering of the tuned configurations, one column per model."""
    cols = [(TUNED_LABELS.get(r["family"], r["family"]) + "/" + r["scenario"], r) for r in tuned_configs]
    names = ("hidden_layers", "neurons", "activation", "loss", "optimizer", "batch_size", "epochs")
    buf = io.StringIO()
    width = max([14] + [len(c[0]) for c in cols]) + 2
    buf.write("hyperparameter".ljust(16) + "".join(c[0].ljust(width) for c in cols) + "\n")
    for n in names:
        buf.write(n.ljust(16) + "".join(str(c[1][n]).ljust(width) for c in cols) + "\n")
    return buf.getvalue()
