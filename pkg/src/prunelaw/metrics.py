"""Goodness-of-fit metrics between loss curves and law predictions.

Three metrics with different blind spots:

* r_squared rewards explaining variance but is dominated by vertical offset;
* huber is a robustified mean error, still offset-sensitive;
* asd (average slope difference) compares consecutive-point slopes over the
  latter half of training, so a prediction that is vertically shifted but
  tracks the curve's shape scores near zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curves import CurveSet, LossCurve
from .errors import MetricError, ValidationError
from .laws import LawSpec, evaluate_arrays
from .units import DEFAULT_UNITS, resolve_unit_scale

DEFAULT_HUBER_DELTA = 1.0
DEFAULT_ASD_POINTS = 50


@dataclass(frozen=True)
class MetricReport:
    """All three metrics for one (law, curve set) pairing."""

    r_squared: float
    huber: float
    huber_delta: float
    asd: float
    asd_n_points: int
    asd_window: str
    n_eval_points: int

    def __post_init__(self):
        if self.huber < 0 or self.asd < 0:
            raise ValidationError("huber and asd are non-negative by construction")
        if self.r_squared > 1.0:
            raise ValidationError("r_squared cannot exceed 1")


def _paired(actual, predicted, min_len: int):
    actual = np.asarray(actual, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if actual.shape != predicted.shape or actual.ndim != 1:
        raise MetricError("actual and predicted must be 1-d series of equal length")
    if len(actual) < min_len:
        raise MetricError(f"need at least {min_len} points, got {len(actual)}")
    if not (np.all(np.isfinite(actual)) and np.all(np.isfinite(predicted))):
        raise MetricError("metrics require finite series")
    return actual, predicted


def r_squared(actual, predicted) -> float:
    """1 - SS_res/SS_tot; 1 is perfect, negative is worse than the mean."""
    actual, predicted = _paired(actual, predicted, min_len=2)
    ss_tot = float(np.sum((actual - actual.mean()) ** 2))
    if ss_tot == 0.0:
        raise MetricError("R^2 undefined for constant series")
    ss_res = float(np.sum((actual - predicted) ** 2))
    return 1.0 - ss_res / ss_tot


def huber(actual, predicted, delta: float = DEFAULT_HUBER_DELTA) -> float:
    """Mean Huber loss of the residuals: quadratic inside delta, linear out."""
    if not delta > 0:
        raise MetricError("huber delta must be > 0")
    actual, predicted = _paired(actual, predicted, min_len=1)
    r = np.abs(actual - predicted)
    per_point = np.where(r <= delta, 0.5 * r**2, delta * (r - 0.5 * delta))
    return float(per_point.mean())


def asd_series(actual, predicted) -> float:
    """Average slope difference of two series on a shared ordered grid.

    (1/N) * sum_{i=2..N} |(y_i - y_{i-1}) - (yhat_i - yhat_{i-1})| with
    N = len(series): the sum has N-1 terms but is normalized by N.
    Consecutive differencing cancels any constant offset.
    """
    actual, predicted = _paired(actual, predicted, min_len=2)
    gaps = np.diff(actual) - np.diff(predicted)
    return float(np.sum(np.abs(gaps)) / len(actual))


def _latter_half_window(curve: LossCurve) -> tuple[float, float]:
    d_min, d_max = float(curve.tokens[0]), float(curve.tokens[-1])
    return (d_min + d_max) / 2.0, d_max


def asd(curve: LossCurve, spec: LawSpec,
        n_points: int = DEFAULT_ASD_POINTS,
        units: str | float = DEFAULT_UNITS,
        axis: str = "tokens",
        window: tuple[float, float] | None = None) -> float:
    """ASD between a recorded curve and a law's prediction of it.

    Sample points are uniform over the latter half of training; the actual
    loss at each sample is piecewise-linear interpolation of the recorded
    checkpoints, the predicted loss is the law evaluated there.

    axis="tokens" spaces samples uniformly in token count over
    [ (D_min+D_max)/2, D_max ]; axis="index" spaces them uniformly in
    checkpoint index over the latter half of the index range instead.
    An explicit window (lo, hi) in raw tokens replaces the latter-half rule,
    e.g. to sample a held-out segment; it must lie inside the curve's token
    range and above zero.
    """
    if n_points < 2:
        raise ValidationError("asd needs n_points >= 2")
    scale = resolve_unit_scale(units)
    tokens = curve.tokens.astype(float)
    if window is not None:
        if axis != "tokens":
            raise ValidationError("an asd window override requires "
                                  "axis='tokens'")
        lo, hi = float(window[0]), float(window[1])
        if not (tokens[0] <= lo < hi <= tokens[-1]) or lo <= 0:
            raise ValidationError(
                "asd window must lie inside the curve's positive token "
                "range")
        samples = np.linspace(lo, hi, n_points)
    elif axis == "tokens":
        lo, hi = _latter_half_window(curve)
        samples = np.linspace(lo, hi, n_points)
    elif axis == "index":
        idx = np.linspace((len(curve) - 1) / 2.0, len(curve) - 1, n_points)
        samples = np.interp(idx, np.arange(len(curve)), tokens)
    else:
        raise ValidationError(f"unknown asd axis {axis!r}")
    if samples[0] >= samples[-1]:
        raise MetricError("sampling window too narrow for asd")
    actual = np.interp(samples, tokens, curve.losses)
    meta = curve.meta
    predicted = evaluate_arrays(spec, meta.n0 / scale, samples / scale,
                                meta.rho, meta.l0)
    return asd_series(actual, predicted)


# =====================================================================
# Aggregates over a curve set
# =====================================================================

def _pooled_series(curve_set: CurveSet, spec: LawSpec, scale: float):
    """Law-evaluable (actual, predicted) pairs pooled over all curves.

    Checkpoints at d=0 (post-pruning baselines) are skipped: every law is
    singular there.
    """
    actual_parts, predicted_parts = [], []
    for curve in curve_set:
        keep = curve.tokens > 0
        if not np.any(keep):
            continue
        meta = curve.meta
        predicted = evaluate_arrays(
            spec, meta.n0 / scale, curve.tokens[keep] / scale,
            meta.rho, meta.l0)
        actual_parts.append(curve.losses[keep])
        predicted_parts.append(predicted)
    if not actual_parts:
        raise MetricError("curve set has no checkpoints with tokens > 0")
    return np.concatenate(actual_parts), np.concatenate(predicted_parts)


def metric_report(curve_set: CurveSet, spec: LawSpec,
                  huber_delta: float = DEFAULT_HUBER_DELTA,
                  asd_n_points: int = DEFAULT_ASD_POINTS,
                  units: str | float = DEFAULT_UNITS) -> MetricReport:
    """All three metrics of one law against one curve set.

    R^2 and Huber pool every checkpoint of every curve; ASD is computed per
    curve (it needs an ordered single-run series) and averaged unweighted.
    CurveSet's run_id ordering makes the result independent of file order.
    """
    scale = resolve_unit_scale(units)
    actual, predicted = _pooled_series(curve_set, spec, scale)
    per_curve_asd = [asd(curve, spec, n_points=asd_n_points, units=scale)
                     for curve in curve_set]
    return MetricReport(
        r_squared=r_squared(actual, predicted),
        huber=huber(actual, predicted, delta=huber_delta),
        huber_delta=huber_delta,
        asd=float(np.mean(per_curve_asd)),
        asd_n_points=asd_n_points,
        asd_window="latter half of token range",
        n_eval_points=len(actual),
    )


def format_metric_table(rows: dict[str, MetricReport]) -> str:
    """Fixed-order text table: one row per label, columns R^2 | Huber | ASD."""
    label_width = max([len("law")] + [len(k) for k in rows])
    header = (f"{'law':<{label_width}}  {'R^2':>12}  {'Huber loss':>12}  "
              f"{'ASD':>12}")
    lines = [header, "-" * len(header)]
    for label, report in rows.items():
        lines.append(
            f"{label:<{label_width}}  {report.r_squared:>12.4f}  "
            f"{report.huber:>12.6f}  {report.asd:>12.6f}")
    return "\n".join(lines)
