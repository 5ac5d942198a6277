"""Experiment orchestration: law comparison, held-out generalization under
three splitting protocols, flattening-point prediction, and synthetic curve
generation for oracle testing.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .curves import VALID_METHODS, CurveSet, LossCurve, RunMeta, save_curves
from .errors import (
    BracketError,
    FitError,
    MetricError,
    SplitError,
    ValidationError,
)
from .fitting import FitOptions, FitResult, fit
from .laws import (
    LawInput,
    LawSpec,
    compatible_methods,
    evaluate_arrays,
    format_law_spec,
    partial_wrt_tokens,
)
from .metrics import (
    DEFAULT_ASD_POINTS,
    DEFAULT_HUBER_DELTA,
    MetricReport,
    asd,
    format_metric_table,
    metric_report,
)
from .units import DEFAULT_UNITS, resolve_unit_scale

PROTOCOLS = ("dataset_size", "model_size", "pruning_rate")

# a held-out run's rho should have a fitting-side counterpart this close
RHO_PAIRING_TOLERANCE = 0.02


# =====================================================================
# Synthetic generation
# =====================================================================

@dataclass(frozen=True)
class SynthSpec:
    """Recipe for ground-truth curves drawn from a known law."""

    true_law: LawSpec
    n0_list: tuple[float, ...]
    rho_list: tuple[float, ...]
    l0_list: tuple[float, ...]
    n_checkpoints: int = 200
    token_spacing: str = "log"
    token_min: float = 5e7
    token_max: float = 8e9
    noise_sigma: float = 0.0
    rng_seed: int = 0
    method: str | None = None
    family: str = "synthetic"
    units: str | float = DEFAULT_UNITS

    def __post_init__(self):
        if not self.n0_list or not self.rho_list:
            raise ValidationError("n0_list and rho_list must be non-empty")
        if len(self.l0_list) != len(self.n0_list):
            raise ValidationError("l0_list must pair one l0 with each n0")
        if any(n <= 0 for n in self.n0_list):
            raise ValidationError("n0 values must be > 0")
        if any(not 0 <= r < 1 for r in self.rho_list):
            raise ValidationError("rho values must lie in [0, 1)")
        if any(l <= 0 for l in self.l0_list):
            raise ValidationError("l0 values must be > 0")
        if self.n_checkpoints < 2:
            raise ValidationError("token schedule needs >= 2 checkpoints")
        if self.token_spacing not in ("linear", "log"):
            raise ValidationError(
                f"token_spacing must be linear or log, got "
                f"{self.token_spacing!r}")
        if not 0 < self.token_min < self.token_max:
            raise ValidationError("need 0 < token_min < token_max")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be >= 0")
        method = self.method
        if method is None:
            allowed = compatible_methods(self.true_law.law_id)
            method = next(m for m in VALID_METHODS if m in allowed)
            object.__setattr__(self, "method", method)
        if method not in compatible_methods(self.true_law.law_id):
            raise ValidationError(
                f"method {method!r} is incompatible with "
                f"{self.true_law.law_id}")

    def token_schedule(self) -> np.ndarray:
        if self.token_spacing == "linear":
            raw = np.linspace(self.token_min, self.token_max,
                              self.n_checkpoints)
        else:
            raw = np.geomspace(self.token_min, self.token_max,
                               self.n_checkpoints)
        tokens = np.unique(np.round(raw).astype(np.int64))
        if len(tokens) < 2:
            raise ValidationError(
                "token schedule collapsed below 2 distinct integer counts")
        return tokens


def _n_after_for(method: str, n0: float, rho: float) -> int:
    if method == "semi24":
        return int(round(n0 / 2))
    return int(round(n0 * (1.0 - rho)))


def generate_synthetic(spec: SynthSpec,
                       path: str | os.PathLike | None = None) -> CurveSet:
    """Curves sampled from spec.true_law, optionally saved to a curve file.

    Deterministic given the seed: equal specs produce byte-identical files.
    """
    rng = np.random.default_rng(spec.rng_seed)
    scale = resolve_unit_scale(spec.units)
    tokens = spec.token_schedule()
    curves = []
    for i, (n0, l0) in enumerate(zip(spec.n0_list, spec.l0_list)):
        for j, rho in enumerate(spec.rho_list):
            losses = evaluate_arrays(spec.true_law, n0 / scale,
                                     tokens / scale, rho, l0)
            if spec.noise_sigma > 0:
                losses = losses + rng.normal(0.0, spec.noise_sigma,
                                             size=losses.shape)
            if np.any(losses <= 0):
                raise ValidationError(
                    "synthetic losses fell to <= 0; lower noise_sigma or "
                    "adjust the law")
            meta = RunMeta(
                run_id=f"{spec.family}-{i:02d}-{j:02d}",
                family=spec.family,
                method=spec.method,
                n0=int(round(n0)),
                rho=rho,
                l0=l0,
                n_after=_n_after_for(spec.method, n0, rho),
            )
            curves.append(LossCurve(meta=meta, tokens=tokens.copy(),
                                    losses=losses))
    curve_set = CurveSet(curves=tuple(curves))
    if path is not None:
        save_curves(curve_set, path, header_comments=(
            "synthetic curves from " + format_law_spec(spec.true_law),
            f"spacing={spec.token_spacing} noise_sigma={spec.noise_sigma!r} "
            f"seed={spec.rng_seed}",
        ))
    return curve_set


# =====================================================================
# Law comparison
# =====================================================================

@dataclass(frozen=True)
class ComparisonRow:
    law_id: str
    fit_result: FitResult
    metrics: MetricReport


@dataclass(frozen=True)
class ComparisonResult:
    rows: tuple[ComparisonRow, ...]     # ranked best-first
    errors: tuple[tuple[str, str], ...]  # (law_id, message) for failed fits


def compare_laws(curve_set: CurveSet, law_ids, opts: FitOptions | None = None,
                 huber_delta: float = DEFAULT_HUBER_DELTA,
                 asd_n_points: int = DEFAULT_ASD_POINTS) -> ComparisonResult:
    """Fit each law on the full set and rank by ASD, then Huber, then R^2
    (higher R^2 first), then law_id.

    A law that cannot be fitted is reported in .errors and excluded from
    the ranking rather than aborting the comparison.
    """
    law_ids = list(law_ids)
    if not law_ids:
        raise ValidationError("nothing to compare: empty law list")
    if len(set(law_ids)) != len(law_ids):
        raise ValidationError("law list contains duplicates")
    opts = opts or FitOptions()
    rows, errors = [], []
    for law_id in law_ids:
        try:
            result = fit(law_id, curve_set, opts)
            report = metric_report(curve_set, result.spec,
                                   huber_delta=huber_delta,
                                   asd_n_points=asd_n_points,
                                   units=opts.units)
        except (FitError, ValidationError, MetricError) as exc:
            errors.append((law_id, str(exc)))
            continue
        rows.append(ComparisonRow(law_id, result, report))
    rows.sort(key=lambda r: (r.metrics.asd, r.metrics.huber,
                             -r.metrics.r_squared, r.law_id))
    return ComparisonResult(rows=tuple(rows), errors=tuple(errors))


def format_comparison(result: ComparisonResult) -> str:
    lines = []
    if result.rows:
        table = format_metric_table(
            {row.law_id: row.metrics for row in result.rows})
        lines.append(table)
    else:
        lines.append("no law could be fitted")
    for law_id, message in result.errors:
        lines.append(f"fit failed for {law_id}: {message}")
    return "\n".join(lines)


# =====================================================================
# Generalization protocols
# =====================================================================

@dataclass(frozen=True)
class SplitSpec:
    """How to partition a curve set into fitting and held-out checkpoints.

    dataset_size keeps the first fit_fraction of each curve's checkpoints
    (by index) for fitting; model_size holds out whole curves by n0;
    pruning_rate holds out whole curves by rho.
    """

    protocol: str
    fit_fraction: float = 0.8
    holdout_n0: tuple[float, ...] = ()
    holdout_rho: tuple[float, ...] = ()

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValidationError(
                f"protocol must be one of {PROTOCOLS}, got "
                f"{self.protocol!r}")
        if not 0.0 < self.fit_fraction < 1.0:
            raise ValidationError("fit_fraction must lie in (0, 1)")
        if self.protocol == "model_size" and not self.holdout_n0:
            raise ValidationError("model_size split needs holdout_n0")
        if self.protocol == "pruning_rate" and not self.holdout_rho:
            raise ValidationError("pruning_rate split needs holdout_rho")


@dataclass(frozen=True)
class GeneralizationResult:
    protocol: str
    fit_result: FitResult
    holdout_metrics: MetricReport
    warnings: tuple[str, ...]
    n_fit_checkpoints: int
    n_holdout_checkpoints: int


def _subcurve(curve: LossCurve, start: int, stop: int) -> LossCurve:
    return LossCurve(meta=curve.meta, tokens=curve.tokens[start:stop].copy(),
                     losses=curve.losses[start:stop].copy())


def _split_dataset_size(curve_set: CurveSet, fraction: float):
    fit_curves, holdout_curves = [], []
    for curve in curve_set:
        k = int(math.floor(fraction * len(curve)))
        if k < 2:
            raise SplitError(
                f"fit_fraction={fraction} leaves under 2 fitting "
                f"checkpoints on run {curve.meta.run_id}")
        if len(curve) - k < 2:
            raise SplitError(
                f"fit_fraction={fraction} leaves under 2 held-out "
                f"checkpoints on run {curve.meta.run_id}")
        fit_curves.append(_subcurve(curve, 0, k))
        holdout_curves.append(_subcurve(curve, k, len(curve)))
    return fit_curves, holdout_curves, ()


def _split_whole_curves(curve_set: CurveSet, split: SplitSpec):
    if split.protocol == "model_size":
        held_values, attr = split.holdout_n0, "n0"
        atol = 0.0
        rtol = 1e-9
    else:
        held_values, attr = split.holdout_rho, "rho"
        atol = 1e-12
        rtol = 0.0

    def held(curve):
        value = getattr(curve.meta, attr)
        return any(np.isclose(value, h, rtol=rtol, atol=atol)
                   for h in held_values)

    for h in held_values:
        if not any(np.isclose(getattr(c.meta, attr), h, rtol=rtol, atol=atol)
                   for c in curve_set):
            raise SplitError(f"holdout {attr}={h!r} matches no curve")
    fit_curves = [c for c in curve_set if not held(c)]
    holdout_curves = [c for c in curve_set if held(c)]
    if not fit_curves:
        raise SplitError("holdout exhausts fitting data: every curve is "
                         "held out")
    warnings = []
    if split.protocol == "model_size":
        fit_rhos = sorted({c.meta.rho for c in fit_curves})
        for curve in holdout_curves:
            nearest = min(fit_rhos, key=lambda r: abs(r - curve.meta.rho))
            if abs(nearest - curve.meta.rho) > RHO_PAIRING_TOLERANCE:
                warnings.append(
                    f"held-out run {curve.meta.run_id} has rho="
                    f"{curve.meta.rho:g} with no fitting-side rate within "
                    f"{RHO_PAIRING_TOLERANCE:g} (nearest {nearest:g})")
    return fit_curves, holdout_curves, tuple(warnings)


def split_curves(curve_set: CurveSet, split: SplitSpec):
    """Partition into (fit_curves, holdout_curves, warnings).

    Deterministic: the partition depends only on the set and the split.
    """
    if split.protocol == "dataset_size":
        parts = _split_dataset_size(curve_set, split.fit_fraction)
    else:
        parts = _split_whole_curves(curve_set, split)
    for curve in parts[1]:
        if int(np.sum(curve.tokens > 0)) < 2:
            raise SplitError(
                f"held-out segment of run {curve.meta.run_id} has under 2 "
                "positive-token checkpoints")
    return parts


def _holdout_report(holdout: CurveSet, spec: LawSpec, huber_delta: float,
                    asd_n_points: int, units) -> MetricReport:
    # pooled R^2/Huber are window-free; ASD is resampled over each held-out
    # segment's own token range instead of the latter-half rule
    base = metric_report(holdout, spec, huber_delta=huber_delta,
                         asd_n_points=asd_n_points, units=units)
    values = []
    for curve in holdout:
        positive = curve.tokens[curve.tokens > 0]
        values.append(asd(curve, spec, n_points=asd_n_points, units=units,
                          window=(float(positive[0]),
                                  float(curve.tokens[-1]))))
    return replace(base, asd=float(np.mean(values)),
                   asd_window="held-out token range")


def run_generalization(curve_set: CurveSet, law_id: str, split: SplitSpec,
                       opts: FitOptions | None = None,
                       huber_delta: float = DEFAULT_HUBER_DELTA,
                       asd_n_points: int = DEFAULT_ASD_POINTS
                       ) -> GeneralizationResult:
    """Fit on the split's fitting portion, score on its held-out portion."""
    opts = opts or FitOptions()
    fit_curves, holdout_curves, warnings = split_curves(curve_set, split)
    fit_set = CurveSet(curves=tuple(fit_curves))
    holdout_set = CurveSet(curves=tuple(holdout_curves))
    result = fit(law_id, fit_set, opts)
    report = _holdout_report(holdout_set, result.spec, huber_delta,
                             asd_n_points, opts.units)
    return GeneralizationResult(
        protocol=split.protocol,
        fit_result=result,
        holdout_metrics=report,
        warnings=warnings + result.warnings,
        n_fit_checkpoints=sum(len(c) for c in fit_curves),
        n_holdout_checkpoints=sum(len(c) for c in holdout_curves),
    )


def format_generalization(result: GeneralizationResult) -> str:
    m = result.holdout_metrics
    lines = [
        f"protocol: {result.protocol}",
        f"fitted {result.fit_result.spec.law_id} on "
        f"{result.n_fit_checkpoints} checkpoints; "
        f"{result.n_holdout_checkpoints} held out",
        f"held-out R^2={m.r_squared:.6f}  Huber={m.huber:.6g}  "
        f"ASD={m.asd:.6g}",
    ]
    for warning in result.warnings:
        lines.append(f"warning: {warning}")
    return "\n".join(lines)


# =====================================================================
# Flattening prediction
# =====================================================================

DEFAULT_FLATTENING_EPSILON = 1e-2
DEFAULT_FLATTENING_BRACKET = (1e-4, 1e4)   # law units (billions of tokens)


@dataclass(frozen=True)
class FlatteningPoint:
    law_id: str
    run_id: str
    epsilon: float
    d_star: float          # law units (billions when units="billions")
    d_star_raw: float      # tokens
    c_star: float          # 6 * n_after * d_star_raw
    slope_at_d_star: float
    bracket: tuple[float, float]
    at_bracket_start: bool


def predict_flattening(spec: LawSpec, meta: RunMeta,
                       epsilon: float = DEFAULT_FLATTENING_EPSILON,
                       bracket: tuple[float, float] = DEFAULT_FLATTENING_BRACKET,
                       units: str | float = DEFAULT_UNITS) -> FlatteningPoint:
    """Smallest compute C = 6*n_after*D at which the loss slope has
    flattened below epsilon.

    epsilon thresholds |dL/dD| with D measured in law units, so the default
    units make it nats per billion tokens.  The crossing is found by
    bisection in log D over the bracket, assuming the slope magnitude is
    decreasing there (true for every law in the family when beta > -1).
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be > 0")
    lo, hi = bracket
    if not 0 < lo < hi:
        raise ValidationError("bracket must satisfy 0 < lo < hi")
    scale = resolve_unit_scale(units)
    n0 = meta.n0 / scale

    def slope(d):
        return partial_wrt_tokens(
            spec, LawInput(n0=n0, d=d, rho=meta.rho, l0=meta.l0))

    slope_lo = slope(lo)
    if slope_lo > 0:
        raise ValidationError(
            f"loss is increasing at the bracket start (dL/dD="
            f"{slope_lo:.3e} at D={lo:g}); flattening is undefined for a "
            "non-decreasing curve")
    if abs(slope_lo) < epsilon:
        d_star = lo
        at_start = True
    else:
        slope_hi = slope(hi)
        if not abs(slope_hi) < epsilon:
            raise BracketError(
                f"slope magnitude never falls below epsilon={epsilon:g} "
                f"inside the bracket: |dL/dD|={abs(slope_lo):.3e} at "
                f"D={lo:g}, {abs(slope_hi):.3e} at D={hi:g} (law units)")
        # invariant: |slope(exp(left))| >= eps > |slope(exp(right))|
        left, right = math.log(lo), math.log(hi)
        for _ in range(200):
            if right - left <= 1e-14 * max(1.0, abs(right)):
                break
            mid = 0.5 * (left + right)
            if abs(slope(math.exp(mid))) < epsilon:
                right = mid
            else:
                left = mid
        d_star = math.exp(right)
        at_start = False
    d_star_raw = d_star * scale
    return FlatteningPoint(
        law_id=spec.law_id,
        run_id=meta.run_id,
        epsilon=epsilon,
        d_star=d_star,
        d_star_raw=d_star_raw,
        c_star=6.0 * meta.n_after * d_star_raw,
        slope_at_d_star=slope(d_star),
        bracket=(lo, hi),
        at_bracket_start=at_start,
    )


def format_flattening(point: FlatteningPoint) -> str:
    return (
        f"run {point.run_id}: {point.law_id} slope falls below "
        f"epsilon={point.epsilon:g} at D*={point.d_star_raw:.6g} tokens "
        f"(C*=6*n_after*D*={point.c_star:.6g}"
        + (", at bracket start" if point.at_bracket_start else "")
        + ")")


# =====================================================================
# Plot data
# =====================================================================

def write_plot_data(path: str | os.PathLike, curve_set: CurveSet,
                    spec: LawSpec, n_predicted: int = 200,
                    units: str | float = DEFAULT_UNITS) -> None:
    """CSV of actual checkpoints and predicted curves on the compute axis.

    Rows are `series_id,x,y,kind` with x = 6*n_after*tokens and kind
    actual or predicted; any plotting tool can consume it.
    """
    if n_predicted < 2:
        raise ValidationError("n_predicted must be >= 2")
    scale = resolve_unit_scale(units)
    lines = ["series_id,x,y,kind"]
    for curve in curve_set:
        meta = curve.meta
        keep = curve.tokens > 0
        for t, y in zip(curve.tokens[keep], curve.losses[keep]):
            lines.append(f"{meta.run_id},{6.0 * meta.n_after * float(t)!r},"
                         f"{float(y)!r},actual")
        grid = np.geomspace(float(curve.tokens[keep][0]),
                            float(curve.tokens[-1]), n_predicted)
        predicted = evaluate_arrays(spec, meta.n0 / scale, grid / scale,
                                    meta.rho, meta.l0)
        for t, y in zip(grid, predicted):
            lines.append(f"{meta.run_id},{6.0 * meta.n_after * float(t)!r},"
                         f"{float(y)!r},predicted")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")
