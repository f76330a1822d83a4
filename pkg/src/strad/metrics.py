"""Segment-level (RPA) and point-adjust (PA) detection metrics plus aggregates.

RPA counting treats every ground-truth anomaly segment as a single sample:
one true positive per segment containing at least one predicted point, one
false negative per untouched segment. False positives are counted per maximal
contiguous predicted run that overlaps no truth segment; a run that overlaps a
segment is fully absorbed by that segment's true positive, with no residual
false positive for the part hanging outside. A per-point false-positive
alternative is available behind `fp_per_point` for comparison (default off).

PA counting applies the classic point-adjustment first (a hit anywhere inside
a truth segment marks the whole segment as predicted) and then counts points.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DataError, ShapeMismatchError
from .series import Segment, segments_from_labels


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if (self.tp + self.fp) else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if (self.tp + self.fn) else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if (p + r) else 0.0


def _as_binary(preds) -> np.ndarray:
    preds = np.asarray(preds)
    if preds.dtype == bool:
        preds = preds.astype(np.int64)
    preds = np.asarray(preds, dtype=np.int64)
    if preds.ndim != 1 or (preds.size and not np.isin(preds, (0, 1)).all()):
        raise DataError("predictions must be a 1-D 0/1 array")
    return preds


def _check_segments(preds: np.ndarray, segments: Sequence[Segment]) -> None:
    for seg in segments:
        if seg.end >= preds.shape[0]:
            raise DataError(f"segment ({seg.start}, {seg.end}) out of range for length {preds.shape[0]}")


def point_adjust(preds, truth_segments: Sequence[Segment]) -> np.ndarray:
    """Mark every truth segment containing a predicted point as fully predicted."""
    preds = _as_binary(preds)
    _check_segments(preds, truth_segments)
    adjusted = preds.copy()
    for seg in truth_segments:
        if preds[seg.start : seg.end + 1].any():
            adjusted[seg.start : seg.end + 1] = 1
    return adjusted


def pa_counts(preds, truth_labels) -> ConfusionCounts:
    """Point-adjusted point-wise confusion counts against the raw labels."""
    preds = _as_binary(preds)
    truth = _as_binary(truth_labels)
    if preds.shape != truth.shape:
        raise ShapeMismatchError(f"preds length {preds.shape} != labels length {truth.shape}")
    adjusted = point_adjust(preds, segments_from_labels(truth))
    tp = int(np.sum((adjusted == 1) & (truth == 1)))
    fp = int(np.sum((adjusted == 1) & (truth == 0)))
    fn = int(np.sum((adjusted == 0) & (truth == 1)))
    return ConfusionCounts(tp=tp, fp=fp, fn=fn)


def rpa_counts(preds, truth_segments: Sequence[Segment], fp_per_point: bool = False) -> ConfusionCounts:
    """Segment-as-sample confusion counts; see the module docstring for rules."""
    preds = _as_binary(preds)
    _check_segments(preds, truth_segments)
    truth_mask = np.zeros(preds.shape[0], dtype=bool)
    for seg in truth_segments:
        truth_mask[seg.start : seg.end + 1] = True

    tp = sum(1 for seg in truth_segments if preds[seg.start : seg.end + 1].any())
    fn = len(truth_segments) - tp

    fp = 0
    for run in segments_from_labels(preds):
        if not truth_mask[run.start : run.end + 1].any():
            fp += run.length if fp_per_point else 1
    return ConfusionCounts(tp=tp, fp=fp, fn=fn)


def entire_f1(per_subdataset: Sequence[tuple[int, float]]) -> float:
    """Segment-count-weighted average of per-sub-dataset F1 scores."""
    total = sum(e for e, _ in per_subdataset)
    if any(e < 0 for e, _ in per_subdataset):
        raise DataError("segment counts must be non-negative")
    if total == 0:
        raise DataError("total segment count is zero")
    return sum(e * f1 for e, f1 in per_subdataset) / total


def avg_improved(f1_star: Sequence[float], f1_mse: Sequence[float]) -> float:
    """Mean of pairwise F1 differences against the MSE baseline."""
    if len(f1_star) != len(f1_mse):
        raise ShapeMismatchError("F1 lists must have equal length")
    if not f1_star:
        raise DataError("need at least one dataset")
    return float(np.mean(np.asarray(f1_star) - np.asarray(f1_mse)))


def air(f1_star: Sequence[float], f1_mse: Sequence[float]) -> float:
    """Mean relative F1 improvement over the MSE baseline.

    Datasets with a zero baseline are dropped with a warning (the denominator
    count shrinks accordingly); if every baseline is zero this is an error.
    """
    if len(f1_star) != len(f1_mse):
        raise ShapeMismatchError("F1 lists must have equal length")
    pairs = [(s, m) for s, m in zip(f1_star, f1_mse) if m > 0]
    dropped = len(f1_star) - len(pairs)
    if dropped:
        warnings.warn(f"dropping {dropped} dataset(s) with zero MSE baseline from A.I.R.")
    if not pairs:
        raise DataError("all MSE baselines are zero; A.I.R. undefined")
    return float(np.mean([(s - m) / m for s, m in pairs]))


@dataclass(frozen=True)
class SubdatasetResult:
    """Per-sub-dataset evaluation row; metrics not requested stay None."""

    name: str
    segment_count: int
    rpa_f1: Optional[float] = None
    pa_f1: Optional[float] = None
    threshold_rpa: Optional[float] = None
    threshold_pa: Optional[float] = None


@dataclass(frozen=True)
class EvalReport:
    """Per-sub-dataset rows plus the segment-weighted entire-dataset F1s.

    Comparison statistics against a baseline objective (Avg.Improved, A.I.R.)
    are produced by the compare pipeline, which returns them per loss arm.
    """

    rows: tuple[SubdatasetResult, ...]
    entire_rpa_f1: Optional[float] = None
    entire_pa_f1: Optional[float] = None
