"""Ingestion, cleaning, min-max scaling and windowing of the Beijing PM2.5 data.

The raw file is the UCI "Beijing PM2.5" hourly CSV::

    No,year,month,day,hour,pm2.5,DEWP,TEMP,PRES,cbwd,Iws,Is,Ir

Rows with a missing ``pm2.5`` reading are dropped, the wind-direction and
calendar columns are discarded and the remaining seven features are scaled to
[0, 1] with a normalizer fitted on the training rows of a scenario.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DataFormatError,
    DegenerateColumnError,
    EmptyDatasetError,
    ParseError,
    ShapeError,
    SizeError,
    ValidationError,
)

log = logging.getLogger(__name__)

UCI_HEADER = ("No", "year", "month", "day", "hour", "pm2.5", "DEWP", "TEMP",
              "PRES", "cbwd", "Iws", "Is", "Ir")
FEATURES = ("pm25", "dewp", "temp", "pres", "iws", "is_snow", "ir_rain")
TARGET = 0  # pm25 column

# Reference counts quoted for the dataset; the published file has one
# record and one missing value fewer.
REFERENCE_RECORD_COUNT = 43825
REFERENCE_MISSING_COUNT = 2068

SCENARIOS = ("daily", "weekly", "monthly")
TEST_LENGTHS = {"daily": 24, "weekly": 168, "monthly": 720}
DEFAULT_LOOKBACK = 24

BUNDLED_SLICE = "beijing_pm25_slice.csv"


@dataclass(frozen=True)
class RawRecord:
    row_no: int
    year: int
    month: int
    day: int
    hour: int
    pm25: float | None
    dewp: float
    temp: float
    pres: float
    cbwd: str
    iws: float
    is_snow: float
    ir_rain: float

    @property
    def timestamp(self) -> np.datetime64:
        return np.datetime64(f"{self.year:04d}-{self.month:02d}-{self.day:02d}T{self.hour:02d}", "h")


def _parse_float(text, row, column):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(row, f"column {column!r}: cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise ParseError(row, f"column {column!r}: non-finite value {text!r}")
    return value


def _parse_int(text, row, column):
    try:
        return int(text)
    except ValueError:
        raise ParseError(row, f"column {column!r}: cannot parse {text!r} as an integer") from None


def load_csv(path) -> list[RawRecord]:
    """Read a UCI Beijing PM2.5 CSV into :class:`RawRecord` objects.

    Missing ``pm2.5`` cells (literal ``NA`` or empty) become ``None``; any
    other unparseable cell raises :class:`ParseError` naming the data row
    (1-based, header excluded).
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != UCI_HEADER:
            raise DataFormatError(f"{path}: missing or unexpected header {header!r}")
        records = []
        for row_idx, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(UCI_HEADER):
                raise ParseError(row_idx, f"expected {len(UCI_HEADER)} columns, got {len(row)}")
            row = [c.strip() for c in row]
            pm = row[5]
            pm25 = None if pm in ("NA", "") else _parse_float(pm, row_idx, "pm2.5")
            rec = RawRecord(
                row_no=_parse_int(row[0], row_idx, "No"),
                year=_parse_int(row[1], row_idx, "year"),
                month=_parse_int(row[2], row_idx, "month"),
                day=_parse_int(row[3], row_idx, "day"),
                hour=_parse_int(row[4], row_idx, "hour"),
                pm25=pm25,
                dewp=_parse_float(row[6], row_idx, "DEWP"),
                temp=_parse_float(row[7], row_idx, "TEMP"),
                pres=_parse_float(row[8], row_idx, "PRES"),
                cbwd=row[9],
                iws=_parse_float(row[10], row_idx, "Iws"),
                is_snow=_parse_float(row[11], row_idx, "Is"),
                ir_rain=_parse_float(row[12], row_idx, "Ir"),
            )
            if not 0 <= rec.hour <= 23:
                raise ParseError(row_idx, f"hour {rec.hour} outside [0, 23]")
            if not 1 <= rec.month <= 12:
                raise ParseError(row_idx, f"month {rec.month} outside [1, 12]")
            records.append(rec)
    return records


def load_bundled_slice() -> list[RawRecord]:
    """The 5,000-row contiguous slice of the cleaned data shipped with the package."""
    ref = resources.files("pso_forecast") / "data" / BUNDLED_SLICE
    with resources.as_file(ref) as path:
        return load_csv(path)


def count_discrepancies(n_records: int, n_missing: int) -> list[str]:
    """Human-readable notes where the file's counts differ from the reference counts."""
    notes = []
    if n_records != REFERENCE_RECORD_COUNT:
        notes.append(f"file has {n_records} records; the reference count is {REFERENCE_RECORD_COUNT}")
    if n_missing != REFERENCE_MISSING_COUNT:
        notes.append(f"file has {n_missing} missing pm2.5 values; the reference count is {REFERENCE_MISSING_COUNT}")
    return notes


@dataclass(frozen=True)
class FeatureMatrix:
    """Cleaned ``rows x 7`` feature values in :data:`FEATURES` order."""

    values: np.ndarray
    timestamps: np.ndarray
    dropped: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != len(FEATURES):
            raise ShapeError(f"feature matrix must be rows x {len(FEATURES)}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("feature matrix contains missing or non-finite values")
        timestamps = np.asarray(self.timestamps, dtype="datetime64[h]")
        if timestamps.shape != (values.shape[0],):
            raise ShapeError("one timestamp per row required")
        values.flags.writeable = False
        timestamps.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "timestamps", timestamps)

    def __len__(self):
        return self.values.shape[0]

    def slice(self, start=None, stop=None) -> "FeatureMatrix":
        return FeatureMatrix(self.values[start:stop], self.timestamps[start:stop])


def clean_and_select(records: Sequence[RawRecord]) -> FeatureMatrix:
    """Drop rows without a pm2.5 reading and keep the seven model features."""
    if len(records) > 1:
        stamps = np.array([r.timestamp for r in records])
        if np.any(np.diff(stamps) <= np.timedelta64(0, "h")):
            raise DataFormatError("records are not strictly ordered in time")
    kept = [r for r in records if r.pm25 is not None]
    if not kept:
        raise EmptyDatasetError("no rows left after dropping missing pm2.5 values")
    values = np.array([(r.pm25, r.dewp, r.temp, r.pres, r.iws, r.is_snow, r.ir_rain) for r in kept],
                      dtype=np.float64)
    stamps = np.array([r.timestamp for r in kept], dtype="datetime64[h]")
    dropped = len(records) - len(kept)
    log.info("kept %d of %d rows (%d missing pm2.5)", len(kept), len(records), dropped)
    return FeatureMatrix(values, stamps, dropped=dropped)


def write_feature_csv(m: FeatureMatrix, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FEATURES)
        for row in m.values:
            writer.writerow([repr(float(v)) for v in row])


@dataclass(frozen=True)
class Normalizer:
    """Per-column min-max scaler, ``(x - min) / (max - min)``."""

    mins: np.ndarray
    maxs: np.ndarray
    columns: tuple = FEATURES

    def __post_init__(self):
        mins = np.array(self.mins, dtype=np.float64)
        maxs = np.array(self.maxs, dtype=np.float64)
        if mins.shape != maxs.shape or mins.ndim != 1 or len(mins) != len(self.columns):
            raise ShapeError("mins/maxs must be vectors with one entry per column")
        for j, name in enumerate(self.columns):
            if not maxs[j] > mins[j]:
                raise DegenerateColumnError(name)
        mins.flags.writeable = False
        maxs.flags.writeable = False
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)

    @property
    def span(self):
        return self.maxs - self.mins

    def _check(self, values):
        values = np.asarray(values, dtype=np.float64)
        if values.shape[-1] != len(self.mins):
            raise ShapeError(f"expected {len(self.mins)} columns, got {values.shape[-1]}")
        return values

    def transform(self, values, clip=False):
        out = (self._check(values) - self.mins) / self.span
        if clip:
            np.clip(out, 0.0, 1.0, out=out)
        return out

    def inverse_transform(self, values):
        return self._check(values) * self.span + self.mins

    def inverse_column(self, values, column=TARGET):
        """Undo the scaling of a single column, e.g. pm25 predictions."""
        return np.asarray(values, dtype=np.float64) * self.span[column] + self.mins[column]

    def save(self, path) -> None:
        lines = []
        for j, name in enumerate(self.columns):
            lines.append(f"{name}.min={self.mins[j]:.17g}")
            lines.append(f"{name}.max={self.maxs[j]:.17g}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "Normalizer":
        entries = {}
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            entries[key.strip()] = float(value)
        columns = []
        for key in entries:
            name = key.rsplit(".", 1)[0]
            if name not in columns:
                columns.append(name)
        try:
            mins = [entries[f"{c}.min"] for c in columns]
            maxs = [entries[f"{c}.max"] for c in columns]
        except KeyError as exc:
            raise DataFormatError(f"{path}: missing normalizer entry {exc}") from None
        return cls(np.array(mins), np.array(maxs), tuple(columns))


def fit_normalizer(m: FeatureMatrix | np.ndarray) -> Normalizer:
    values = m.values if isinstance(m, FeatureMatrix) else np.asarray(m, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != len(FEATURES):
        raise ShapeError(f"expected rows x {len(FEATURES)}, got {values.shape}")
    if values.shape[0] < 2:
        raise SizeError("at least two rows are needed to fit a normalizer")
    return Normalizer(values.min(axis=0), values.max(axis=0))


def normalize(m: FeatureMatrix, n: Normalizer, clip=False) -> FeatureMatrix:
    return FeatureMatrix(n.transform(m.values, clip=clip), m.timestamps)


def denormalize(m: FeatureMatrix, n: Normalizer) -> FeatureMatrix:
    return FeatureMatrix(n.inverse_transform(m.values), m.timestamps)


def _freeze(*arrays):
    for a in arrays:
        a.flags.writeable = False


@dataclass(frozen=True)
class ScenarioDataset:
    """Windowed, normalized train/test arrays for one evaluation scenario.

    ``train_x``/``test_x`` have shape ``(n, lookback, 7)``; targets are the
    normalized pm25 value of the row right after each window. ``*_times`` hold
    the target timestamps, ``test_y_raw`` the unscaled test targets in µg/m³.
    """

    scenario: str
    lookback: int
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    normalizer: Normalizer
    train_times: np.ndarray = field(repr=False)
    test_times: np.ndarray = field(repr=False)
    test_y_raw: np.ndarray = field(repr=False)

    @property
    def n_features(self):
        return self.train_x.shape[2]

    def validation_split(self, fraction=0.1):
        """Chronological (fit, validation) split of the training windows."""
        n = len(self.train_y)
        n_val = max(1, int(round(n * fraction)))
        if n_val >= n:
            raise SizeError(f"{n} training windows cannot hold a {fraction:.0%} validation tail")
        cut = n - n_val
        return (self.train_x[:cut], self.train_y[:cut]), (self.train_x[cut:], self.train_y[cut:])


def make_scenario(m: FeatureMatrix, scenario: str, lookback: int = DEFAULT_LOOKBACK,
                  test_len: int | None = None) -> ScenarioDataset:
    """Split ``m`` into stride-1 windows with a chronological test tail.

    The test tail holds the last 24 / 168 / 720 targets for the daily /
    weekly / monthly scenario. The normalizer is fitted on the training rows
    only; test rows falling outside the fitted range are clipped into [0, 1].
    """
    if scenario not in TEST_LENGTHS:
        raise ValidationError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    if lookback < 1:
        raise ValidationError("lookback must be >= 1")
    test_len = TEST_LENGTHS[scenario] if test_len is None else int(test_len)
    n = len(m)
    if n < lookback + test_len + 1:
        raise SizeError(f"{n} rows cannot hold lookback {lookback} + {test_len} test targets + 1 training target")
    split = n - test_len
    normalizer = fit_normalizer(m.values[:split])
    scaled = np.empty_like(m.values)
    scaled[:split] = normalizer.transform(m.values[:split])
    scaled[split:] = normalizer.transform(m.values[split:], clip=True)

    windows = np.lib.stride_tricks.sliding_window_view(scaled, lookback, axis=0)
    windows = windows.transpose(0, 2, 1)[: n - lookback]  # window i covers rows i .. i+L-1
    targets = scaled[lookback:, TARGET]
    stamps = m.timestamps[lookback:]
    n_train = split - lookback

    train_x = np.ascontiguousarray(windows[:n_train])
    test_x = np.ascontiguousarray(windows[n_train:])
    train_y, test_y = targets[:n_train].copy(), targets[n_train:].copy()
    train_t, test_t = stamps[:n_train].copy(), stamps[n_train:].copy()
    test_raw = m.values[split:, TARGET].copy()
    _freeze(train_x, test_x, train_y, test_y, train_t, test_t, test_raw)
    return ScenarioDataset(scenario, lookback, train_x, train_y, test_x, test_y, normalizer,
                           train_t, test_t, test_raw)


def make_scenarios(m: FeatureMatrix, scenarios: Iterable[str] = SCENARIOS,
                   lookback: int = DEFAULT_LOOKBACK) -> dict[str, ScenarioDataset]:
    return {s: make_scenario(m, s, lookback) for s in scenarios}
