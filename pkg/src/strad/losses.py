"""Structure-aware reconstruction losses: trend, seasonality, shape, and MSE.

Each component provides a value and an analytic gradient with respect to the
reconstruction. Single-window functions accept a `Window` or a (t, d) array;
the `*_batch` variants operate on stacked (B, t, d) arrays and are what the
trainer and scorer call in their hot loops. Both paths share the same kernels.

Multivariate inputs are handled by computing trend and seasonality per channel
and summing; shape and MSE already run over all entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

from .errors import ConfigError, ShapeMismatchError
from .series import Window
from .spectral import ZERO_MODULUS, _transform

TREND_VARIANTS = ("negated_log", "monotone")

# Slope pairs closer than this are treated as a non-differentiable tie of the
# trend term and get the subgradient 0.
SLOPE_TIE = 1e-12

ArrayLike = Union[Window, np.ndarray]


@dataclass(frozen=True)
class LossWeights:
    """Weights of the combined objective plus the trend stability constant.

    `trend_variant` selects the trend term's form: "negated_log" is
    -ln(D + eps), which decreases as the slope discrepancy D grows, so
    minimizing it rewards trend mismatch; "monotone" is ln(D + eps) - ln(eps),
    non-negative, zero at D = 0, and increasing in D. See `trend_loss`.
    The monotone form is the training default.
    """

    lambda1: float = 1.5
    lambda2: float = 10.0
    lambda3: float = 1.0
    epsilon: float = 1e-7
    trend_variant: str = "monotone"

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0 or self.lambda3 < 0:
            raise ConfigError("loss weights must be non-negative")
        if self.lambda1 == 0 and self.lambda2 == 0 and self.lambda3 == 0:
            raise ConfigError("at least one loss weight must be positive")
        if self.epsilon <= 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.trend_variant not in TREND_VARIANTS:
            raise ConfigError(f"trend_variant must be one of {TREND_VARIANTS}")


@dataclass(frozen=True)
class LossBreakdown:
    """Per-component values and their weighted total."""

    trend: float
    seasonality: float
    shape: float
    total: float


@lru_cache(maxsize=64)
def _time_axis(t: int) -> np.ndarray:
    """Normalized time axis tau_j = -1 + 2j/(t-1), the degree-1 projection domain."""
    tau = -1.0 + 2.0 * np.arange(t) / (t - 1)
    tau.setflags(write=False)
    return tau


@lru_cache(maxsize=64)
def _slope_weights(t: int) -> tuple[np.ndarray, float]:
    """OLS slope functional w (slope = w . x per channel) and sum_j |tau_j|."""
    tau = _time_axis(t)
    w = tau / float(np.sum(tau * tau))
    w.setflags(write=False)
    return w, float(np.sum(np.abs(tau)))


def _as_window_array(x: ArrayLike) -> np.ndarray:
    data = x.data if isinstance(x, Window) else np.asarray(x, dtype=np.float64)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2:
        raise ShapeMismatchError(f"expected a (t, d) window, got shape {data.shape}")
    return data


def _as_pair(x: ArrayLike, x_rec: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    a = _as_window_array(x)
    b = _as_window_array(x_rec)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"window shapes differ: {a.shape} vs {b.shape}")
    return a, b


# ---------------------------------------------------------------------------
# batched kernels, inputs of shape (B, t, d)
# ---------------------------------------------------------------------------


def slopes_batch(X: np.ndarray) -> np.ndarray:
    """Per-channel OLS slopes on the normalized time axis; (B, t, d) -> (B, d)."""
    t = X.shape[1]
    if t < 2:
        raise ShapeMismatchError("trend fitting needs window length >= 2")
    w, _ = _slope_weights(t)
    return np.einsum("btd,t->bd", X, w)


def trend_batch(X, XR, epsilon: float, variant: str, want_grad: bool = False):
    """Trend component values (B,) and optionally gradients (B, t, d)."""
    if variant not in TREND_VARIANTS:
        raise ConfigError(f"trend_variant must be one of {TREND_VARIANTS}")
    t = X.shape[1]
    w, abs_tau_sum = _slope_weights(t)
    a = slopes_batch(X)
    b = slopes_batch(XR)
    diff = b - a  # (B, d)
    disc = abs_tau_sum * np.sum(np.abs(diff), axis=1)  # (B,)
    if variant == "negated_log":
        values = -np.log(disc + epsilon)
    else:
        values = np.log(disc + epsilon) - math.log(epsilon)
    if not want_grad:
        return values, None
    sign = np.where(np.abs(diff) < SLOPE_TIE, 0.0, np.sign(diff))  # (B, d)
    scale = abs_tau_sum / (disc + epsilon)  # (B,)
    if variant == "negated_log":
        scale = -scale
    grads = scale[:, None, None] * w[None, :, None] * sign[:, None, :]
    return values, grads


def seasonality_batch(X, XR, want_grad: bool = False, split_parts: bool = False):
    """Spectral L1 values (B,) summed over channels; gradients (B, t, d)."""
    # Channels become the batch axis of the transform: (B, d, t).
    fx = _transform(np.swapaxes(X, 1, 2).astype(np.complex128))
    fr = _transform(np.swapaxes(XR, 1, 2).astype(np.complex128))
    delta = fr - fx  # gradient is taken with respect to the reconstruction
    if split_parts:
        values = np.sum(np.abs(delta.real) + np.abs(delta.imag), axis=(1, 2))
        if not want_grad:
            return values, None
        weights = np.sign(delta.real) - 1j * np.sign(delta.imag)
        grads = _transform(weights).real
    else:
        mod = np.abs(delta)
        values = np.sum(mod, axis=(1, 2))
        if not want_grad:
            return values, None
        with np.errstate(invalid="ignore"):  # non-finite inputs surface via the loss check
            unit = np.where(mod < ZERO_MODULUS, 0.0, delta / np.maximum(mod, ZERO_MODULUS))
        grads = _transform(np.conj(unit)).real
    return values, np.swapaxes(grads, 1, 2)


def shape_batch(X, XR, want_grad: bool = False):
    """Sum of absolute entry differences (B,); gradient is the sign pattern."""
    diff = XR - X
    values = np.sum(np.abs(diff), axis=(1, 2))
    if not want_grad:
        return values, None
    return values, np.sign(diff)


def mse_batch(X, XR, want_grad: bool = False):
    """Mean squared error over all t*d entries; gradient 2(XR - X)/(t*d)."""
    diff = XR - X
    n = diff.shape[1] * diff.shape[2]
    values = np.sum(diff * diff, axis=(1, 2)) / n
    if not want_grad:
        return values, None
    return values, 2.0 * diff / n


def strad_batch(X, XR, weights: LossWeights, want_grad: bool = False):
    """Combined objective: component arrays, totals, and optional gradients.

    Returns (trend, seasonality, shape, total) arrays of shape (B,) and the
    gradient array (B, t, d) or None. The total and the gradient are the
    identically weighted sums of the components.
    """
    tre, g1 = trend_batch(X, XR, weights.epsilon, weights.trend_variant, want_grad)
    sea, g2 = seasonality_batch(X, XR, want_grad)
    shp, g3 = shape_batch(X, XR, want_grad)
    total = weights.lambda1 * tre + weights.lambda2 * sea + weights.lambda3 * shp
    if not want_grad:
        return tre, sea, shp, total, None
    grads = weights.lambda1 * g1 + weights.lambda2 * g2 + weights.lambda3 * g3
    return tre, sea, shp, total, grads


# ---------------------------------------------------------------------------
# single-window API
# ---------------------------------------------------------------------------


def trend_fit(window: ArrayLike) -> np.ndarray:
    """Per-channel OLS slope of the window against the normalized time axis."""
    data = _as_window_array(window)
    return slopes_batch(data[None])[0]


def trend_loss(x: ArrayLike, x_rec: ArrayLike, epsilon: float = 1e-7,
               variant: str = "monotone") -> float:
    """Trend discrepancy term.

    With slope discrepancy D = sum_c |a_c - b_c| * sum_j |tau_j| (intercepts
    excluded, so constant offsets do not register):

    - "negated_log": -ln(D + epsilon)
    - "monotone":  ln(D + epsilon) - ln(epsilon), non-negative and zero at D=0
    """
    a, b = _as_pair(x, x_rec)
    values, _ = trend_batch(a[None], b[None], epsilon, variant)
    return float(values[0])


def trend_loss_grad(x: ArrayLike, x_rec: ArrayLike, epsilon: float = 1e-7,
                    variant: str = "monotone") -> np.ndarray:
    """Gradient of `trend_loss` in the reconstruction; 0 for tied slopes."""
    a, b = _as_pair(x, x_rec)
    _, grads = trend_batch(a[None], b[None], epsilon, variant, want_grad=True)
    return grads[0]


def seasonality_loss(x: ArrayLike, x_rec: ArrayLike, split_parts: bool = False) -> float:
    """Per-channel spectral L1 distance, summed over channels."""
    a, b = _as_pair(x, x_rec)
    values, _ = seasonality_batch(a[None], b[None], split_parts=split_parts)
    return float(values[0])


def seasonality_loss_grad(x: ArrayLike, x_rec: ArrayLike, split_parts: bool = False) -> np.ndarray:
    a, b = _as_pair(x, x_rec)
    _, grads = seasonality_batch(a[None], b[None], want_grad=True, split_parts=split_parts)
    return grads[0]


def shape_loss(x: ArrayLike, x_rec: ArrayLike) -> float:
    """Sum of absolute differences over all t*d entries."""
    a, b = _as_pair(x, x_rec)
    values, _ = shape_batch(a[None], b[None])
    return float(values[0])


def shape_loss_grad(x: ArrayLike, x_rec: ArrayLike) -> np.ndarray:
    """Entrywise sign(x_rec - x), with sign(0) = 0."""
    a, b = _as_pair(x, x_rec)
    _, grads = shape_batch(a[None], b[None], want_grad=True)
    return grads[0]


def mse_loss(x: ArrayLike, x_rec: ArrayLike) -> float:
    a, b = _as_pair(x, x_rec)
    values, _ = mse_batch(a[None], b[None])
    return float(values[0])


def mse_loss_grad(x: ArrayLike, x_rec: ArrayLike) -> np.ndarray:
    a, b = _as_pair(x, x_rec)
    _, grads = mse_batch(a[None], b[None], want_grad=True)
    return grads[0]


def strad_loss(x: ArrayLike, x_rec: ArrayLike, weights: LossWeights) -> LossBreakdown:
    """Component values and their weighted total for one window pair."""
    a, b = _as_pair(x, x_rec)
    tre, sea, shp, total, _ = strad_batch(a[None], b[None], weights)
    return LossBreakdown(
        trend=float(tre[0]), seasonality=float(sea[0]), shape=float(shp[0]),
        total=float(total[0]),
    )


def strad_grad(x: ArrayLike, x_rec: ArrayLike, weights: LossWeights) -> np.ndarray:
    """Weighted sum of the component gradients, entrywise."""
    a, b = _as_pair(x, x_rec)
    _, _, _, _, grads = strad_batch(a[None], b[None], weights, want_grad=True)
    return grads[0]
