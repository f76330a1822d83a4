"""Core series containers: CSV ingestion, normalization, windowing, label segments.

All types are immutable after construction (backing arrays are marked
read-only), so they can be shared freely between threads.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DataError,
    MissingColumnError,
    NonBinaryLabelError,
    NonFiniteValueError,
    NonNumericCellError,
    ShapeMismatchError,
)

# Channels with (population) standard deviation below this floor are stored
# with std equal to the floor, so constant channels normalize to zero instead
# of dividing by zero.
STD_FLOOR = 1e-8


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeSeries:
    """A real-valued series of shape (length, channels) with optional 0/1 labels.

    Parameters
    ----------
    values : array (M, d)
        One row per time point. 1-D input is promoted to a single channel.
    labels : array (M,), optional
        Per-point anomaly indicator, values in {0, 1}.
    name : str
        Identifier used in reports and file names.
    """

    values: np.ndarray
    labels: Optional[np.ndarray] = None
    name: str = "series"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise DataError(f"values must be 1-D or 2-D, got ndim={values.ndim}")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise DataError(f"values must be non-empty, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values).all(axis=1))[0])
            raise NonFiniteValueError(f"non-finite value at row {bad} of series {self.name!r}")
        object.__setattr__(self, "values", _readonly(values))
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (values.shape[0],):
                raise DataError(
                    f"labels length {labels.shape} does not match series length {values.shape[0]}"
                )
            if not np.isin(labels, (0, 1)).all():
                raise NonBinaryLabelError("labels must contain only 0 and 1")
            object.__setattr__(self, "labels", _readonly(labels))

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Window:
    """A length-t view into a parent series, starting at offset `start`."""

    data: np.ndarray  # (t, d)
    start: int = 0

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data[:, None]
        if data.ndim != 2 or data.shape[0] < 1:
            raise DataError(f"window data must be (t, d) with t >= 1, got {data.shape}")
        if self.start < 0:
            raise DataError(f"window start must be >= 0, got {self.start}")
        object.__setattr__(self, "data", _readonly(data))

    @property
    def length(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class WindowSet:
    """Sliding windows in start order; consecutive starts differ by `stride`."""

    windows: tuple[Window, ...]
    window_length: int
    stride: int

    def __len__(self) -> int:
        return len(self.windows)

    def stack(self) -> np.ndarray:
        """All window data as one (N, t, d) array."""
        return np.stack([w.data for w in self.windows])

    def starts(self) -> np.ndarray:
        return np.array([w.start for w in self.windows], dtype=np.int64)


@dataclass(frozen=True)
class NormalizationStats:
    """Per-channel mean and clamped population standard deviation."""

    mean: np.ndarray  # (d,)
    std: np.ndarray  # (d,), >= STD_FLOOR

    def __post_init__(self):
        object.__setattr__(self, "mean", _readonly(np.asarray(self.mean, dtype=np.float64)))
        object.__setattr__(self, "std", _readonly(np.asarray(self.std, dtype=np.float64)))
        if (self.std < STD_FLOOR).any():
            raise DataError("std entries must be clamped to at least the floor")


@dataclass(frozen=True, order=True)
class Segment:
    """An inclusive index range [start, end]."""

    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.end < self.start:
            raise DataError(f"invalid segment ({self.start}, {self.end})")

    @property
    def length(self) -> int:
        return self.end - self.start + 1


def load_csv(
    path,
    value_columns: Sequence[str],
    label_column: Optional[str] = None,
    name: Optional[str] = None,
) -> TimeSeries:
    """Load a series from a headed CSV file.

    Row order defines time order; there is no timestamp parsing. Leading lines
    starting with '#' are treated as provenance comments and skipped. Value
    cells are parsed as decimal floats, the label column as integer 0/1.

    Raises
    ------
    FileNotFoundError
        If `path` does not exist.
    MissingColumnError, NonNumericCellError, NonBinaryLabelError,
    NonFiniteValueError
        On the corresponding malformed content, naming row and column.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise DataError(f"{path}: no header row")
    header, data_rows = rows[0], rows[1:]
    col_index = {c: i for i, c in enumerate(header)}
    wanted = list(value_columns) + ([label_column] if label_column else [])
    for col in wanted:
        if col not in col_index:
            raise MissingColumnError(f"{path}: column {col!r} not in header {header}")
    if not data_rows:
        raise DataError(f"{path}: no data rows")

    width = max(col_index[c] for c in wanted) + 1 if wanted else 0
    values = np.empty((len(data_rows), len(value_columns)), dtype=np.float64)
    labels = np.empty(len(data_rows), dtype=np.int64) if label_column else None
    for i, row in enumerate(data_rows):
        if len(row) < width:
            raise DataError(f"{path}: row {i} has {len(row)} cells, expected {len(header)}")
        for j, col in enumerate(value_columns):
            cell = row[col_index[col]]
            try:
                v = float(cell)
            except ValueError:
                raise NonNumericCellError(
                    f"{path}: row {i}, column {col!r}: {cell!r} is not numeric"
                ) from None
            if not math.isfinite(v):
                raise NonFiniteValueError(f"{path}: row {i}, column {col!r}: non-finite value")
            values[i, j] = v
        if label_column:
            cell = row[col_index[label_column]].strip()
            try:
                lab = int(cell)
            except ValueError:
                lab = -1
            if lab not in (0, 1):
                raise NonBinaryLabelError(
                    f"{path}: row {i}, column {label_column!r}: {cell!r} is not 0/1"
                )
            labels[i] = lab
    return TimeSeries(values=values, labels=labels, name=name or path.stem)


def fit_normalization(series: TimeSeries) -> NormalizationStats:
    """Per-channel mean and population standard deviation (divide by M)."""
    mean = series.values.mean(axis=0)
    std = series.values.std(axis=0)  # population formula
    std = np.maximum(std, STD_FLOOR)
    return NormalizationStats(mean=mean, std=std)


def apply_normalization(series: TimeSeries, stats: NormalizationStats) -> TimeSeries:
    """Return a z-scored copy of `series`; labels are carried over unchanged."""
    if stats.mean.shape[0] != series.channels:
        raise ShapeMismatchError(
            f"stats have {stats.mean.shape[0]} channels, series has {series.channels}"
        )
    values = (series.values - stats.mean) / stats.std
    return TimeSeries(values=values, labels=series.labels, name=series.name)


def sliding_windows(series: TimeSeries, length: int, stride: int = 1) -> WindowSet:
    """Cut the series into N = floor((M - t)/stride) + 1 windows of length t.

    Window k covers rows [k*stride, k*stride + t). Window data are read-only
    views of the parent array, not copies.
    """
    if length < 1:
        raise DataError(f"window length must be >= 1, got {length}")
    if stride < 1:
        raise DataError(f"stride must be >= 1, got {stride}")
    if length > series.length:
        raise DataError(f"window length {length} exceeds series length {series.length}")
    count = (series.length - length) // stride + 1
    windows = tuple(
        Window(data=series.values[k * stride : k * stride + length], start=k * stride)
        for k in range(count)
    )
    return WindowSet(windows=windows, window_length=length, stride=stride)


def segments_from_labels(labels) -> list[Segment]:
    """Maximal runs of 1s as inclusive segments, in index order."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1:
        raise DataError("labels must be 1-D")
    if labels.size and not np.isin(labels, (0, 1)).all():
        raise NonBinaryLabelError("labels must contain only 0 and 1")
    padded = np.concatenate(([0], labels, [0]))
    delta = np.diff(padded)
    starts = np.flatnonzero(delta == 1)
    ends = np.flatnonzero(delta == -1) - 1
    return [Segment(int(s), int(e)) for s, e in zip(starts, ends)]


def labels_from_segments(segments: Sequence[Segment], length: int) -> np.ndarray:
    """Expand inclusive segments back into a binary label array."""
    labels = np.zeros(length, dtype=np.int64)
    for seg in segments:
        if seg.end >= length:
            raise DataError(f"segment ({seg.start}, {seg.end}) exceeds length {length}")
        labels[seg.start : seg.end + 1] = 1
    return labels
