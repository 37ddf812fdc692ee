"""Loading, validation, and time-aggregation of raw multivariate series.

A :class:`TimeSeriesBatch` is the package's single in-memory representation
of aligned series: an N x T float64 grid plus an N x T boolean ``observed``
mask.  Missing entries hold NaN, but the mask -- not the NaN sentinel -- is
what every downstream algorithm consults.
"""

import csv
import math
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .errors import (
    DuplicateTimestamp,
    EmptyFile,
    InvalidInterval,
    MissingColumn,
    ShapeMismatch,
    UnparseableTimestamp,
    UnparseableValue,
)

AGG_FUNCTIONS = ("mean", "min", "max", "sum", "last")


@dataclass
class TimeSeriesBatch:
    """N aligned series of T observations with an explicit missing-value mask.

    Attributes:
        names: one name per series (length N).
        values: N x T float64 grid; NaN wherever ``observed`` is False.
        observed: N x T boolean mask; True means the value was present.
        t0: time coordinate of the first grid index.
        step: spacing between consecutive grid indices, in timestamp units.
    """

    names: list[str]
    values: np.ndarray
    observed: np.ndarray
    t0: float = 0.0
    step: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.observed = np.asarray(self.observed, dtype=bool)
        if self.values.ndim != 2 or self.values.shape != self.observed.shape:
            raise ShapeMismatch(
                f"values {self.values.shape} and observed {self.observed.shape} "
                "must be equal 2-D shapes")
        if len(self.names) != self.values.shape[0]:
            raise ShapeMismatch(
                f"{len(self.names)} names for {self.values.shape[0]} series")
        if self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise ShapeMismatch("batch needs at least one series and one step")
        # Normalize the sentinel: masked-out cells are exactly NaN.
        self.values = np.where(self.observed, self.values, np.nan)
        if not np.all(np.isfinite(self.values[self.observed])):
            raise UnparseableValue("observed entries must be finite")

    @property
    def n_series(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.values.shape[1]

    def zero_filled(self) -> np.ndarray:
        """Values with missing entries replaced by 0.0 (copy)."""
        return np.where(self.observed, self.values, 0.0)

    def series_index(self, name_or_index) -> int:
        if isinstance(name_or_index, str):
            try:
                return self.names.index(name_or_index)
            except ValueError:
                raise KeyError(name_or_index) from None
        return int(name_or_index)


def _parse_timestamp(text: str, lineno: int) -> float:
    text = text.strip()
    try:
        return float(int(text))
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    try:
        return datetime.fromisoformat(text).timestamp()
    except ValueError:
        raise UnparseableTimestamp(
            f"line {lineno}: cannot parse timestamp {text!r}") from None


def _parse_value(text: str, lineno: int, col: str) -> float:
    text = text.strip()
    if text == "":
        return math.nan
    try:
        return float(text)
    except ValueError:
        raise UnparseableValue(
            f"line {lineno}, column {col!r}: cannot parse value {text!r}") from None


def load_csv(path, time_col: str, value_cols: list[str] | None = None,
             tick: float | None = None) -> TimeSeriesBatch:
    """Load a batch from an RFC-4180-style CSV with a header row.

    Empty cells denote missing values.  Rows are sorted by timestamp and
    become consecutive grid indices; with ``tick`` given, rows are instead
    placed at grid index floor((ts - ts_min) / tick), so irregular
    timestamps land on a uniform grid.  Two rows on the same index raise
    :class:`DuplicateTimestamp`.  ``value_cols=None`` selects every column
    except ``time_col``.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{path}: no header row") from None
        header = [h.strip() for h in header]
        if time_col not in header:
            raise MissingColumn(f"{path}: missing time column {time_col!r}")
        if value_cols is None:
            value_cols = [h for h in header if h != time_col]
        for col in value_cols:
            if col not in header:
                raise MissingColumn(f"{path}: missing value column {col!r}")
        t_idx = header.index(time_col)
        v_idx = [header.index(c) for c in value_cols]

        stamps: list[float] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(cell.strip() == "" for cell in row):
                continue
            stamps.append(_parse_timestamp(row[t_idx], lineno))
            rows.append([_parse_value(row[i], lineno, header[i]) if i < len(row)
                         else math.nan for i in v_idx])

    if not rows:
        raise EmptyFile(f"{path}: header only, no data rows")

    order = np.argsort(np.asarray(stamps), kind="stable")
    ts = np.asarray(stamps, dtype=np.float64)[order]
    grid = np.asarray(rows, dtype=np.float64)[order]

    if tick is not None:
        if tick <= 0:
            raise InvalidInterval(f"tick must be positive, got {tick}")
        idx = np.floor((ts - ts[0]) / tick).astype(np.int64)
        step = float(tick)
    else:
        if len(ts) > 1 and np.any(np.diff(ts) == 0):
            dup = ts[np.flatnonzero(np.diff(ts) == 0)[0]]
            raise DuplicateTimestamp(f"{path}: duplicate timestamp {dup}")
        idx = np.arange(len(ts), dtype=np.int64)
        step = 1.0

    if len(np.unique(idx)) != len(idx):
        dup = ts[np.flatnonzero(np.diff(idx) == 0)[0] + 1]
        raise DuplicateTimestamp(f"{path}: two rows in one tick bucket "
                                 f"(ts={dup})")

    n_steps = int(idx[-1]) + 1
    values = np.full((len(value_cols), n_steps), np.nan)
    values[:, idx] = grid.T
    observed = ~np.isnan(values)
    return TimeSeriesBatch(list(value_cols), values, observed, t0=float(ts[0]),
                           step=step)


def write_csv(batch: TimeSeriesBatch, path, time_col: str = "t") -> None:
    """Write a batch back to CSV; missing entries become empty cells."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([time_col] + list(batch.names))
        for j in range(batch.n_steps):
            ts = batch.t0 + j * batch.step
            ts_txt = repr(int(ts)) if float(ts).is_integer() else repr(float(ts))
            row = [ts_txt]
            for n in range(batch.n_series):
                row.append(repr(float(batch.values[n, j]))
                           if batch.observed[n, j] else "")
            writer.writerow(row)


def aggregate(batch: TimeSeriesBatch, interval: int, fn: str = "mean") -> TimeSeriesBatch:
    """Downsample by grouping ``interval`` consecutive ticks into one bucket.

    Only observed entries contribute; a bucket with no observed entries is
    missing.  Output length is ceil(T / interval).
    """
    if interval < 1:
        raise InvalidInterval(f"interval must be >= 1, got {interval}")
    if fn not in AGG_FUNCTIONS:
        raise InvalidInterval(f"unknown aggregation fn {fn!r}; "
                              f"expected one of {AGG_FUNCTIONS}")
    if interval == 1:
        return TimeSeriesBatch(list(batch.names), batch.values.copy(),
                               batch.observed.copy(), batch.t0, batch.step)

    n, t = batch.values.shape
    n_buckets = -(-t // interval)
    padded = np.full((n, n_buckets * interval), np.nan)
    padded[:, :t] = batch.values
    cube = padded.reshape(n, n_buckets, interval)
    obs = ~np.isnan(cube)
    counts = obs.sum(axis=2)

    if fn == "mean":
        out = np.nansum(cube, axis=2) / np.maximum(counts, 1)
    elif fn == "min":
        out = np.where(obs, cube, np.inf).min(axis=2)
    elif fn == "max":
        out = np.where(obs, cube, -np.inf).max(axis=2)
    elif fn == "sum":
        out = np.nansum(cube, axis=2)
    else:  # last observed entry of each bucket
        rev = obs[:, :, ::-1]
        last_off = interval - 1 - np.argmax(rev, axis=2)
        out = np.take_along_axis(cube, last_off[:, :, None], axis=2)[:, :, 0]

    observed = counts > 0
    out = np.where(observed, out, np.nan)
    return TimeSeriesBatch(list(batch.names), out, observed, batch.t0,
                           batch.step * interval)
