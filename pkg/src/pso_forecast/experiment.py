"""Baseline hidden-layer sweeps and PSO tuning runs.

Results are appended to CSV files in the output directory one grid cell at a
time, so an interrupted run keeps everything finished before the failure.
Every cell gets its own seed, hashed from the master seed and the cell
coordinates; adding cells never changes the seed of an existing one.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DivergenceError, NumericError, ValidationError
from .fetch import DEFAULT_SOURCES, default_cache_dir, fetch_dataset
from .hyperspace import SearchSpace, decode_values, format_config, to_configs
from .metrics import REPORT_FIELDS, MetricsReport, evaluate_predictions, rmse
from .nn.model import FAMILIES, ModelSpec, TrainConfig, build_model, fit, predict
from .pipeline import (
    SCENARIOS,
    FeatureMatrix,
    ScenarioDataset,
    clean_and_select,
    load_bundled_slice,
    load_csv,
    make_scenario,
)
from .pso import PsoConfig, PsoResult, optimize, write_trace_csv

log = logging.getLogger(__name__)

BASELINE_FILE = "baseline_results.csv"
TUNED_FILE = "tuned_results.csv"
TUNED_CONFIGS_FILE = "tuned_configs.csv"
TIMINGS_FILE = "timings.json"

TUNED_LABELS = {"lstm": "PSO-LSTM", "cnn": "PSO-CNN", "mlp": "PSO-MLP"}
TUNED_CONFIG_FIELDS = ("family", "scenario", "hidden_layers", "neurons", "activation", "loss", "optimizer",
                       "batch_size", "epochs", "val_rmse", "initial_best_val_rmse", "search_epoch_cap",
                       "evaluations", "seed")
# Activation of the untuned models; no reference value exists.
BASELINE_ACTIVATIONS = {"mlp": "relu", "lstm": "tanh", "cnn": "relu"}


@dataclass(frozen=True)
class BaselinePreset:
    neurons: int = 32
    loss: str = "mse"
    optimizer: str = "adam"
    epochs: int = 100
    batch_size: int = 72
    learning_rate: float = 0.001


@dataclass(frozen=True)
class RunConfig:
    data: str = "bundled"  # "bundled", "full" or a CSV path
    url: str | None = None
    cache_dir: str | None = None
    scenarios: tuple = ("daily",)
    lookback: int = 24
    families: tuple = FAMILIES
    hl_values: tuple = tuple(range(2, 11))
    baseline: BaselinePreset = BaselinePreset()
    pso: PsoConfig = PsoConfig()
    space: SearchSpace = field(default_factory=SearchSpace.default)
    seed: int = 0
    out: str = "results"
    fast_search: bool = False
    search_epoch_cap: int = 10
    validation_fraction: float = 0.1
    workers: int = 1

    def __post_init__(self):
        if not self.scenarios:
            raise ValidationError("at least one scenario is required")
        if not self.families:
            raise ValidationError("at least one model family is required")
        for s in self.scenarios:
            if s not in SCENARIOS:
                raise ValidationError(f"unknown scenario {s!r}")
        for f in self.families:
            if f not in FAMILIES:
                raise ValidationError(f"unknown family {f!r}")
        for hl in self.hl_values:
            if not 2 <= hl <= 10:
                raise ValidationError(f"hidden layer count {hl} outside [2, 10]")
        if self.lookback < 2:
            raise ValidationError("lookback must be >= 2")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")
        if not 0 < self.validation_fraction < 1:
            raise ValidationError("validation_fraction must lie in (0, 1)")
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")

    @property
    def outdir(self) -> Path:
        return Path(self.out)

    def to_flat(self) -> dict[str, str]:
        flat = {
            "data": self.data, "url": self.url or "", "cache_dir": self.cache_dir or "",
            "scenarios": ",".join(self.scenarios), "lookback": str(self.lookback),
            "families": ",".join(self.families), "hl_values": ",".join(map(str, self.hl_values)),
            "seed": str(self.seed), "out": self.out, "fast_search": str(self.fast_search).lower(),
            "search_epoch_cap": str(self.search_epoch_cap),
            "validation_fraction": repr(self.validation_fraction), "workers": str(self.workers),
        }
        flat.update({f"baseline.{k}": str(v) for k, v in asdict(self.baseline).items()})
        flat.update({f"pso.{k}": "" if v is None else str(v) for k, v in asdict(self.pso).items()})
        flat.update({f"space.{k}": v for k, v in self.space.to_dict().items()})
        return flat


def _split_list(text):
    return tuple(p.strip() for p in str(text).replace(";", ",").split(",") if p.strip())


def _parse_hl(text):
    out = []
    for part in _split_list(text):
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _parse_bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off", ""):
        return False
    raise ValidationError(f"not a boolean: {text!r}")


def config_from_mapping(entries: dict[str, str], base: RunConfig | None = None) -> RunConfig:
    """Apply flat ``key -> text`` overrides (the config-file schema) to ``base``."""
    cfg = base or RunConfig()
    top, baseline, pso, space = {}, {}, {}, dict(cfg.space.to_dict())
    converters = {
        "data": str, "url": lambda v: v or None, "cache_dir": lambda v: v or None,
        "scenarios": _split_list, "lookback": int, "families": _split_list, "hl_values": _parse_hl,
        "seed": int, "out": str, "fast_search": _parse_bool, "search_epoch_cap": int,
        "validation_fraction": float, "workers": int,
    }
    base_types = {k: type(v) for k, v in asdict(cfg.baseline).items()}
    pso_types = {k: type(v) for k, v in asdict(PsoConfig()).items()}
    pso_types["eval_budget"] = int
    try:
        for key, value in entries.items():
            key = key.strip().lower()
            value = str(value).strip()
            if key.startswith("baseline."):
                name = key.split(".", 1)[1]
                if name not in base_types:
                    raise ValidationError(f"unknown config key {key!r}")
                baseline[name] = base_types[name](value)
            elif key.startswith("pso."):
                name = key.split(".", 1)[1]
                if name not in pso_types:
                    raise ValidationError(f"unknown config key {key!r}")
                pso[name] = None if value in ("", "none") else pso_types[name](value)
            elif key.startswith("space."):
                space[key.split(".", 1)[1]] = value
            elif key in converters:
                top[key] = converters[key](value)
            else:
                raise ValidationError(f"unknown config key {key!r}")
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad config value: {exc}") from None
    return replace(cfg, **top, baseline=replace(cfg.baseline, **baseline), pso=replace(cfg.pso, **pso),
                   space=SearchSpace.from_dict(space))


def load_config(path, base: RunConfig | None = None) -> RunConfig:
    """Read a flat ``key = value`` file; an optional ``[run]`` header is allowed."""
    text = Path(path).read_text()
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"{path}: {exc}") from None
    entries = {}
    for section in parser.sections():
        entries.update(parser[section])
    return config_from_mapping(entries, base)


def derive_seed(master: int, *parts) -> int:
    """Stable 63-bit seed from the master seed and a cell key."""
    key = "|".join(str(p) for p in (master,) + parts)
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "big") >> 1


def load_features(cfg: RunConfig) -> FeatureMatrix:
    if cfg.data == "bundled":
        records = load_bundled_slice()
    elif cfg.data == "full":
        cache = Path(cfg.cache_dir) if cfg.cache_dir else default_cache_dir()
        records = load_csv(fetch_dataset(cfg.url, cache))
    else:
        records = load_csv(cfg.data)
    return clean_and_select(records)


def load_datasets(cfg: RunConfig, features: FeatureMatrix | None = None) -> dict[str, ScenarioDataset]:
    features = features if features is not None else load_features(cfg)
    return {s: make_scenario(features, s, cfg.lookback) for s in cfg.scenarios}


def check_writable(outdir) -> Path:
    """Create ``outdir`` and prove it accepts files; raises ``OSError`` otherwise."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    probe = outdir / ".write_probe"
    probe.write_text("")
    probe.unlink()
    return outdir


def _mapper(workers):
    @contextmanager
    def ctx():
        if workers <= 1:
            yield None
        else:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                yield ex.map
    return ctx()


# --------------------------------------------------------------------------
# baseline sweep


@dataclass(frozen=True)
class SweepCell:
    family: str
    scenario: str
    hl: int


def baseline_configs(cfg: RunConfig, cell: SweepCell):
    b = cfg.baseline
    seed = derive_seed(cfg.seed, cell.family, cell.scenario, cell.hl)
    spec = ModelSpec(cell.family, cell.hl, b.neurons, BASELINE_ACTIVATIONS[cell.family])
    epochs = min(b.epochs, cfg.search_epoch_cap) if cfg.fast_search else b.epochs
    train_cfg = TrainConfig(b.loss, b.optimizer, b.batch_size, epochs, b.learning_rate, seed)
    return spec, train_cfg


def _nan_row(label, scenario, hl, seed):
    return [label, scenario, str(hl), "nan", "nan", "0", "0", str(seed)]


def run_cell(task):
    """Train and score one baseline cell; returns ``(row, seconds)``."""
    cfg, cell, dataset = task
    spec, train_cfg = baseline_configs(cfg, cell)
    label = cell.family.upper()
    t0 = time.perf_counter()
    try:
        model = build_model(spec, dataset.train_x.shape[1:], seed=train_cfg.seed)
        fit(model, dataset.train_x, dataset.train_y, train_cfg)
        report = evaluate_predictions(predict(model, dataset.test_x), dataset, label, cell.hl, train_cfg.seed)
        row = report.row()
    except NumericError as exc:
        log.warning("%s %s HL-%d diverged: %s", label, cell.scenario, cell.hl, exc)
        row = _nan_row(label, cell.scenario, cell.hl, train_cfg.seed)
    return row, time.perf_counter() - t0


def sweep_cells(cfg: RunConfig):
    return [SweepCell(f, s, hl) for s in cfg.scenarios for f in cfg.families for hl in cfg.hl_values]


def run_baseline_sweep(cfg: RunConfig, datasets: dict[str, ScenarioDataset] | None = None) -> list[list[str]]:
    """Train every (family, scenario, HL) cell with the baseline preset.

    Rows go to ``baseline_results.csv`` (rewritten from scratch each run) and
    are flushed one by one.
    """
    outdir = check_writable(cfg.outdir)
    datasets = datasets if datasets is not None else load_datasets(cfg)
    cells = sweep_cells(cfg)
    rows, timings = [], {}
    with (outdir / BASELINE_FILE).open("w", newline="") as fh, _mapper(cfg.workers) as mapper:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_FIELDS)
        fh.flush()
        tasks = [(cfg, c, datasets[c.scenario]) for c in cells]
        results = map(run_cell, tasks) if mapper is None else mapper(run_cell, tasks)
        for cell, (row, seconds) in zip(cells, results):
            writer.writerow(row)
            fh.flush()
            rows.append(row)
            timings[f"{cell.family}/{cell.scenario}/HL-{cell.hl}"] = round(seconds, 3)
            log.info("%s %s HL-%d: mape=%s rmse=%s (%.1fs)", cell.family, cell.scenario, cell.hl,
                     row[3], row[4], seconds)
    _merge_timings(outdir, "baseline", timings)
    return rows


def _merge_timings(outdir, key, timings):
    path = Path(outdir) / TIMINGS_FILE
    data = json.loads(path.read_text()) if path.exists() else {}
    data.setdefault(key, {}).update(timings)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# PSO tuning


class SearchObjective:
    """Validation RMSE of a decoded configuration.

    The model trains on the first 90% of the training windows and is scored
    on the remaining chronological 10%. Identical decoded configurations are
    scored once. A diverging run scores ``inf``.
    """

    def __init__(self, dataset: ScenarioDataset, family: str, space: SearchSpace, master_seed: int,
                 epoch_cap: int | None = None, validation_fraction: float = 0.1, learning_rate=None):
        self.family = family
        self.space = space
        self.master_seed = master_seed
        self.scenario = dataset.scenario
        self.epoch_cap = epoch_cap
        self.learning_rate = learning_rate
        (self.fit_x, self.fit_y), (self.val_x, self.val_y) = dataset.validation_split(validation_fraction)
        self.cache: dict[str, float] = {}

    def configs(self, position):
        values = decode_values(position, self.space)
        key = format_config(values, self.space)
        seed = derive_seed(self.master_seed, self.family, self.scenario, "search", key)
        spec, cfg = to_configs(values, self.family, seed, self.learning_rate)
        if self.epoch_cap is not None and cfg.epochs > self.epoch_cap:
            cfg = replace(cfg, epochs=max(self.epoch_cap, 5))
        return key, spec, cfg

    def __call__(self, position) -> float:
        key, spec, cfg = self.configs(position)
        if key in self.cache:
            return self.cache[key]
        try:
            model = build_model(spec, self.fit_x.shape[1:], seed=cfg.seed)
            fit(model, self.fit_x, self.fit_y, cfg)
            with np.errstate(all="ignore"):
                score = rmse(self.val_y, predict(model, self.val_x))
        except NumericError as exc:
            log.info("search config %s diverged: %s", key, exc)
            score = math.inf
        if not math.isfinite(score):
            score = math.inf
        self.cache[key] = score
        log.debug("%s %s -> %.6g", self.family, key, score)
        return score


@dataclass
class TuningOutcome:
    family: str
    scenario: str
    values: dict
    report: MetricsReport
    pso: PsoResult
    val_rmse: float
    initial_best: float
    seed: int
    seconds: float

    def config_row(self, cfg: RunConfig) -> list[str]:
        v = self.values
        cap = str(cfg.search_epoch_cap) if cfg.fast_search else ""
        return [self.family, self.scenario, str(v["hidden_layers"]), str(v["neurons"]), v["activation"],
                v["loss"], v["optimizer"], str(v["batch_size"]), str(v["epochs"]), f"{self.val_rmse:.10f}",
                f"{self.initial_best:.10f}", cap, str(self.pso.n_evaluations), str(self.seed)]


def tune_one(cfg: RunConfig, family: str, dataset: ScenarioDataset, mapper=None) -> TuningOutcome:
    """PSO search for one family on one scenario, then retrain the winner on all training windows."""
    t0 = time.perf_counter()
    cap = cfg.search_epoch_cap if cfg.fast_search else None
    objective = SearchObjective(dataset, family, cfg.space, cfg.seed, cap, cfg.validation_fraction,
                                cfg.baseline.learning_rate)
    pso_cfg = replace(cfg.pso, seed=derive_seed(cfg.seed, family, dataset.scenario, "pso"))
    result = optimize(cfg.space, pso_cfg, objective, mapper=mapper)
    if not math.isfinite(result.best_score):
        raise DivergenceError(0, f"every {family} configuration diverged during the search")
    values = decode_values(result.best, cfg.space)
    seed = derive_seed(cfg.seed, family, dataset.scenario, "tuned")
    spec, train_cfg = to_configs(values, family, seed, cfg.baseline.learning_rate)
    model = build_model(spec, dataset.train_x.shape[1:], seed=seed)
    fit(model, dataset.train_x, dataset.train_y, train_cfg)
    report = evaluate_predictions(predict(model, dataset.test_x), dataset, TUNED_LABELS[family],
                                  values["hidden_layers"], seed)
    return TuningOutcome(family, dataset.scenario, values, report, result, result.best_score,
                         result.trace[0], seed, time.perf_counter() - t0)


def run_tuning(cfg: RunConfig, families=None, datasets=None) -> list[TuningOutcome]:
    """Tune every requested family on every scenario and write the result files."""
    outdir = check_writable(cfg.outdir)
    datasets = datasets if datasets is not None else load_datasets(cfg)
    families = tuple(families or cfg.families)
    outcomes = []
    with (outdir / TUNED_FILE).open("w", newline="") as rf, \
            (outdir / TUNED_CONFIGS_FILE).open("w", newline="") as cf, _mapper(cfg.workers) as mapper:
        rw = csv.writer(rf, lineterminator="\n")
        cw = csv.writer(cf, lineterminator="\n")
        rw.writerow(REPORT_FIELDS)
        cw.writerow(TUNED_CONFIG_FIELDS)
        for scenario in cfg.scenarios:
            for family in families:
                out = tune_one(cfg, family, datasets[scenario], mapper)
                describe = lambda pos: format_config(decode_values(pos, cfg.space), cfg.space)  # noqa: E731
                write_trace_csv(out.pso, outdir / f"pso_trace_{family}_{scenario}.csv", describe)
                rw.writerow(out.report.row())
                cw.writerow(out.config_row(cfg))
                rf.flush()
                cf.flush()
                outcomes.append(out)
                log.info("%s %s tuned: %s val_rmse=%.6g test mape=%.4f rmse=%.6f", family, scenario,
                         format_config(out.values, cfg.space), out.val_rmse, out.report.mape_percent,
                         out.report.rmse_normalized)
    _merge_timings(outdir, "tuning", {f"{o.family}/{o.scenario}": round(o.seconds, 3) for o in outcomes})
    return outcomes
