"""Training loop, per-point anomaly scoring, and threshold selection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, DataError, NumericError, ShapeMismatchError
from .losses import LossWeights, mse_batch, seasonality_batch, slopes_batch, strad_batch, _slope_weights
from .metrics import ConfusionCounts, pa_counts, rpa_counts
from .model import DenseAutoencoder, backward_batch, forward_batch, init_adam, adam_step
from .series import Segment, TimeSeries, WindowSet, segments_from_labels

LOSS_KINDS = ("mse", "strad", "mse_plus_strad")
SCORE_MODES = ("shape_only", "strad_broadcast")
THRESHOLD_METRICS = ("rpa", "pa")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    loss_kind: str = "strad"
    weights: LossWeights = field(default_factory=LossWeights)
    mix: float = 0.5  # mse_plus_strad: mix*MSE + (1-mix)*StrAD
    lr: float = 1e-3

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.loss_kind not in LOSS_KINDS:
            raise ConfigError(f"loss_kind must be one of {LOSS_KINDS}, got {self.loss_kind!r}")
        if not 0.0 <= self.mix <= 1.0:
            raise ConfigError(f"mix must lie in [0, 1], got {self.mix}")


@dataclass(frozen=True)
class EpochStats:
    """Mean per-window losses over one epoch; components are None for MSE."""

    total: float
    trend: Optional[float] = None
    seasonality: Optional[float] = None
    shape: Optional[float] = None


@dataclass
class TrainResult:
    model: DenseAutoencoder
    history: list[EpochStats]
    steps: int


@dataclass(frozen=True)
class ScoreSeries:
    """Per-point anomaly scores and the number of windows covering each point."""

    scores: np.ndarray  # (M,)
    coverage: np.ndarray  # (M,) ints

    def __post_init__(self):
        if not np.isfinite(self.scores).all():
            raise NumericError("anomaly scores contain non-finite values")


def _batch_loss(X, XR, cfg: TrainConfig):
    """Per-window loss values, upstream gradients, and component means."""
    if cfg.loss_kind == "mse":
        values, grads = mse_batch(X, XR, want_grad=True)
        return values, grads, None
    tre, sea, shp, total, sgrads = strad_batch(X, XR, cfg.weights, want_grad=True)
    components = (tre, sea, shp)
    if cfg.loss_kind == "strad":
        return total, sgrads, components
    mvalues, mgrads = mse_batch(X, XR, want_grad=True)
    values = cfg.mix * mvalues + (1.0 - cfg.mix) * total
    grads = cfg.mix * mgrads + (1.0 - cfg.mix) * sgrads
    return values, grads, components


def train(model: DenseAutoencoder, windows: WindowSet, cfg: TrainConfig) -> TrainResult:
    """Algorithmic core: encode, reconstruct, evaluate objective, Adam update.

    Each epoch walks a seeded permutation of the windows in batches; the
    per-batch parameter gradient is the mean over the batch. History records
    per-epoch mean total loss, plus component means for the combined objective.
    Raises NumericError the moment a loss, gradient, or parameter goes
    non-finite instead of clipping.
    """
    t, d = windows.window_length, windows.windows[0].channels
    if t * d != model.input_size:
        raise ShapeMismatchError(f"windows flatten to {t * d}, model expects {model.input_size}")
    data = windows.stack()  # (N, t, d)
    n = data.shape[0]
    rng = np.random.default_rng(cfg.seed)
    state = init_adam(model, lr=cfg.lr)
    model = model.copy()
    history: list[EpochStats] = []
    steps = 0
    track_components = cfg.loss_kind != "mse"
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        total_sum = 0.0
        comp_sums = np.zeros(3)
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            X = data[idx]
            flat = X.reshape(len(idx), -1)
            acts = forward_batch(model, flat)
            XR = acts[-1].reshape(X.shape)
            values, grads, components = _batch_loss(X, XR, cfg)
            if not np.isfinite(values).all():
                raise NumericError("non-finite loss during training")
            total_sum += float(values.sum())
            if components is not None:
                comp_sums += [float(c.sum()) for c in components]
            upstream = grads.reshape(len(idx), -1) / len(idx)  # mean over the batch
            param_grads = backward_batch(model, acts, upstream)
            model, state = adam_step(model, param_grads, state)
            steps += 1
        if track_components:
            history.append(EpochStats(
                total=total_sum / n,
                trend=comp_sums[0] / n,
                seasonality=comp_sums[1] / n,
                shape=comp_sums[2] / n,
            ))
        else:
            history.append(EpochStats(total=total_sum / n))
    return TrainResult(model=model, history=history, steps=steps)


def score(
    model: DenseAutoencoder,
    series: TimeSeries,
    length: int,
    stride: int = 1,
    weights: Optional[LossWeights] = None,
    mode: str = "shape_only",
    chunk: int = 1024,
) -> ScoreSeries:
    """Per-point anomaly scores from sliding-window reconstruction error.

    Every window contributes, to each of its points, the channel-summed
    absolute reconstruction error scaled by lambda3. In "strad_broadcast" mode
    the window-level trend (monotone variant, regardless of the training
    variant, so scores never reward mismatch) and seasonality terms are
    additionally spread uniformly over the window's points. A point covered by
    several windows gets the average of its contributions; uncovered points
    (possible only at the tail with stride > 1) score 0.
    """
    if mode not in SCORE_MODES:
        raise ConfigError(f"mode must be one of {SCORE_MODES}, got {mode!r}")
    weights = weights or LossWeights()
    if length > series.length:
        raise DataError(f"window length {length} exceeds series length {series.length}")
    t, d = length, series.channels
    if t * d != model.input_size:
        raise ShapeMismatchError(f"windows flatten to {t * d}, model expects {model.input_size}")
    n_windows = (series.length - t) // stride + 1
    sums = np.zeros(series.length)
    coverage = np.zeros(series.length, dtype=np.int64)
    for lo in range(0, n_windows, chunk):
        count = min(chunk, n_windows - lo)
        starts = (lo + np.arange(count)) * stride
        X = np.stack([series.values[s : s + t] for s in starts])
        XR = forward_batch(model, X.reshape(count, -1))[-1].reshape(X.shape)
        contrib = weights.lambda3 * np.sum(np.abs(X - XR), axis=2)  # (count, t)
        if mode == "strad_broadcast":
            sea, _ = seasonality_batch(X, XR)
            _, abs_tau_sum = _slope_weights(t)
            slope_gap = np.abs(slopes_batch(XR) - slopes_batch(X)).sum(axis=1) * abs_tau_sum
            tre = np.log(slope_gap + weights.epsilon) - np.log(weights.epsilon)
            contrib = contrib + ((weights.lambda1 * tre + weights.lambda2 * sea) / t)[:, None]
        for i, s in enumerate(starts):  # deterministic reduction order
            sums[s : s + t] += contrib[i]
            coverage[s : s + t] += 1
    scores = np.divide(sums, coverage, out=np.zeros_like(sums), where=coverage > 0)
    return ScoreSeries(scores=scores, coverage=coverage)


def _counts_at(preds: np.ndarray, labels: np.ndarray, segments: list[Segment],
               metric: str, fp_per_point: bool) -> ConfusionCounts:
    if metric == "rpa":
        return rpa_counts(preds, segments, fp_per_point=fp_per_point)
    return pa_counts(preds, labels)


def threshold_best_f1(
    score_series: ScoreSeries,
    labels,
    metric: str = "rpa",
    fp_per_point: bool = False,
) -> tuple[float, float]:
    """Best-F1 threshold sweep over the distinct observed scores plus +inf.

    Predictions at threshold theta are `scores >= theta`. Ties are broken
    toward the higher threshold (fewer positives). Returns (threshold, f1).
    """
    if metric not in THRESHOLD_METRICS:
        raise ConfigError(f"metric must be one of {THRESHOLD_METRICS}, got {metric!r}")
    if labels is None:
        raise DataError("threshold_best_f1 requires labels")
    labels = np.asarray(labels, dtype=np.int64)
    scores = score_series.scores
    if labels.shape != scores.shape:
        raise ShapeMismatchError("labels and scores must have equal length")
    segments = segments_from_labels(labels)
    best_threshold = np.inf
    best_f1 = 0.0  # +inf threshold predicts nothing: F1 = 0 under the 0/0 convention
    for threshold in np.unique(scores)[::-1]:  # descending: ties keep the higher threshold
        preds = (scores >= threshold).astype(np.int64)
        f1 = _counts_at(preds, labels, segments, metric, fp_per_point).f1
        if f1 > best_f1:
            best_f1 = f1
            best_threshold = float(threshold)
    return best_threshold, best_f1


def threshold_quantile(score_series: ScoreSeries, q: float) -> float:
    """Linear-interpolation q-quantile of (training-split) scores."""
    if not 0.0 < q <= 1.0:
        raise ConfigError(f"q must lie in (0, 1], got {q}")
    if score_series.scores.size == 0:
        raise DataError("cannot take a quantile of empty scores")
    return float(np.quantile(score_series.scores, q))
