"""Levenberg-Marquardt fitting of one law jointly across a curve set.

Hand-built on numpy: damped normal equations with diagonal (Fletcher-style)
scaling, multiplicative damping schedule, and seeded multi-start over the
documented initialization box.  Analytic Jacobians come from the laws
module; nothing here differentiates numerically.

Parameters are optimized in natural space (fitted values may legitimately
be negative), with n0/d rescaled per the unit convention before they reach
a law.  Domain or overflow failures during a trial step are treated as an
infinitely bad objective, so the step is rejected rather than crashing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curves import CurveSet
from .errors import FitError, LawDomainError, LawEvaluationError, ValidationError
from .laws import (
    LAW_PARAMS,
    LawSpec,
    compatible_methods,
    evaluate_arrays,
    format_law_spec,
    param_gradient_arrays,
)
from .units import DEFAULT_UNITS, resolve_unit_scale

_DAMPING_CAP = 1e14
_DAMPING_FLOOR = 1e-14
_OBJECTIVE_FLOOR = 1e-280
_CONDITION_WARN = 1e12

# Initialization box per parameter kind; brackets every fitted value we ship.
_INIT_EXPONENT = (-2.0, 2.0)
_INIT_SCALE = (0.0, 10.0)
_INIT_OFFSET = (-3.0, 3.0)


@dataclass(frozen=True)
class FitOptions:
    """Knobs of the LM engine; defaults are the documented contract."""

    max_iterations: int = 500
    initial_damping: float = 1e-3
    damping_up: float = 10.0
    damping_down: float = 0.1
    step_norm_tol: float = 1e-10
    objective_decrease_tol: float = 1e-12
    n_starts: int = 32
    rng_seed: int = 0
    objective: str = "squared"
    huber_delta: float = 1.0
    units: str | float = DEFAULT_UNITS

    def __post_init__(self):
        if self.max_iterations < 1 or self.n_starts < 1:
            raise ValidationError("max_iterations and n_starts must be >= 1")
        for name in ("initial_damping", "damping_up", "step_norm_tol",
                     "objective_decrease_tol", "huber_delta"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be > 0")
        if not 0 < self.damping_down < 1:
            raise ValidationError("damping_down must lie in (0, 1)")
        if self.objective not in ("squared", "huber"):
            raise ValidationError("objective must be 'squared' or 'huber'")


@dataclass(frozen=True)
class StartSummary:
    """Outcome of one multi-start LM run."""

    start_index: int
    status: str            # converged | max_iterations | stalled | infeasible
    iterations: int
    objective: float       # +inf when the start never found a feasible point


@dataclass(frozen=True)
class FitResult:
    spec: LawSpec
    objective_value: float
    objective: str
    residuals: np.ndarray = field(repr=False)
    iterations: int
    converged: bool
    start_index: int
    unit_convention: str
    warnings: tuple[str, ...]
    n_skipped_zero_token: int
    per_start: tuple[StartSummary, ...]

    def __post_init__(self):
        arr = np.asarray(self.residuals, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "residuals", arr)


class _Problem:
    """Pooled arrays for one (law, curve set) fit, in law units."""

    def __init__(self, law_id: str, curves: CurveSet, scale: float):
        if curves.method not in compatible_methods(law_id):
            raise ValidationError(
                f"{law_id} cannot be fitted on method={curves.method!r} "
                f"curves (compatible: {sorted(compatible_methods(law_id))})")
        n0s, ds, rhos, l0s, ys = [], [], [], [], []
        skipped = 0
        for curve in curves:
            keep = curve.tokens > 0
            skipped += int(np.sum(~keep))
            meta = curve.meta
            d = curve.tokens[keep].astype(float) / scale
            n0s.append(np.full(len(d), meta.n0 / scale))
            rhos.append(np.full(len(d), meta.rho))
            l0s.append(np.full(len(d), meta.l0))
            ds.append(d)
            ys.append(curve.losses[keep])
        self.law_id = law_id
        self.n0 = np.concatenate(n0s)
        self.d = np.concatenate(ds)
        self.rho = np.concatenate(rhos)
        self.l0 = np.concatenate(l0s)
        self.y = np.concatenate(ys)
        self.n_skipped = skipped
        n_params = len(LAW_PARAMS[law_id])
        if len(self.y) <= n_params:
            raise ValidationError(
                f"underdetermined: {len(self.y)} usable checkpoints for "
                f"{n_params} parameters of {law_id}")

    def residuals(self, theta: np.ndarray) -> np.ndarray:
        spec = LawSpec.from_vector(self.law_id, theta)
        predicted = evaluate_arrays(spec, self.n0, self.d, self.rho, self.l0)
        return predicted - self.y

    def jacobian(self, theta: np.ndarray) -> np.ndarray:
        spec = LawSpec.from_vector(self.law_id, theta)
        return param_gradient_arrays(spec, self.n0, self.d, self.rho, self.l0)


def _objective_of(residuals: np.ndarray, opts: FitOptions) -> float:
    # overflow to +inf is fine here: an infinite objective rejects the step
    with np.errstate(over="ignore"):
        if opts.objective == "squared":
            return float(np.sum(residuals**2))
        r = np.abs(residuals)
        d = opts.huber_delta
        return float(np.sum(np.where(r <= d, 0.5 * r**2, d * (r - 0.5 * d))))


def _irls_weights(residuals: np.ndarray, opts: FitOptions) -> np.ndarray:
    if opts.objective == "squared":
        return np.ones_like(residuals)
    r = np.abs(residuals)
    return np.where(r <= opts.huber_delta, 1.0,
                    opts.huber_delta / np.maximum(r, 1e-300))


def _try_objective(problem: _Problem, theta: np.ndarray,
                   opts: FitOptions) -> tuple[float, np.ndarray | None]:
    try:
        r = problem.residuals(theta)
    except (LawDomainError, LawEvaluationError, ValidationError):
        return np.inf, None
    return _objective_of(r, opts), r


def _solve_step(A: np.ndarray, g: np.ndarray, damping: float) -> np.ndarray:
    scaling = np.maximum(np.diag(A), 1e-12)
    M = A + damping * np.diag(scaling)
    try:
        return np.linalg.solve(M, -g)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(M, -g, rcond=None)[0]


def _run_single_start(problem: _Problem, theta0: np.ndarray,
                      opts: FitOptions):
    """One LM run; returns (theta, residuals, objective, iters, status)."""
    objective, residuals = _try_objective(problem, theta0, opts)
    if residuals is None:
        return theta0, None, np.inf, 0, "infeasible"
    theta = theta0.copy()
    damping = opts.initial_damping
    status = "max_iterations"
    iteration = 0
    while iteration < opts.max_iterations:
        iteration += 1
        if objective <= _OBJECTIVE_FLOOR:
            status = "converged"
            break
        J = problem.jacobian(theta)
        w = _irls_weights(residuals, opts)
        Jw = J * w[:, None]
        A = J.T @ Jw
        g = Jw.T @ residuals
        step = _solve_step(A, g, damping)
        new_objective, new_residuals = _try_objective(problem, theta + step,
                                                      opts)
        if new_objective < objective:
            decrease = objective - new_objective
            theta = theta + step
            residuals = new_residuals
            objective = new_objective
            damping = max(damping * opts.damping_down, _DAMPING_FLOOR)
            step_small = (np.linalg.norm(step)
                          <= opts.step_norm_tol
                          * (np.linalg.norm(theta) + opts.step_norm_tol))
            flat = decrease <= opts.objective_decrease_tol * max(
                objective, _OBJECTIVE_FLOOR)
            if step_small or flat:
                status = "converged"
                break
        else:
            damping *= opts.damping_up
            if damping > _DAMPING_CAP:
                status = "stalled"
                break
    return theta, residuals, objective, iteration, status


def _draw_starts(law_id: str, opts: FitOptions) -> np.ndarray:
    rng = np.random.default_rng(opts.rng_seed)
    names = LAW_PARAMS[law_id]
    starts = np.empty((opts.n_starts, len(names)))
    for j, name in enumerate(names):
        if name in ("N_C", "D_C"):
            lo, hi = _INIT_SCALE
        elif name == "E":
            lo, hi = _INIT_OFFSET
        else:
            lo, hi = _INIT_EXPONENT
        starts[:, j] = rng.uniform(lo, hi, size=opts.n_starts)
    return starts


def _identifiability_warnings(problem: _Problem, theta: np.ndarray,
                              opts: FitOptions) -> list[str]:
    names = LAW_PARAMS[problem.law_id]
    warnings = []
    try:
        J = problem.jacobian(theta)
    except (LawDomainError, LawEvaluationError):
        return ["jacobian not evaluable at the solution"]
    col_max = np.max(np.abs(J), axis=0)
    for name, cmax in zip(names, col_max):
        if cmax == 0.0:
            warnings.append(
                f"parameter {name} has an all-zero Jacobian column: "
                "unidentifiable on this data")
    w = _irls_weights(problem.residuals(theta), opts)
    A = J.T @ (J * w[:, None])
    condition = np.linalg.cond(A)
    if not np.isfinite(condition) or condition > _CONDITION_WARN:
        warnings.append(
            f"normal equations condition number {condition:.2e} exceeds "
            f"{_CONDITION_WARN:.0e}: parameters are degenerate on this data "
            "(rank-deficient Jacobian)")
    return warnings


def fit(law_id: str, curves: CurveSet,
        opts: FitOptions = FitOptions()) -> FitResult:
    """Best-of-n-starts LM fit of law_id to every checkpoint of curves.

    Deterministic given opts.rng_seed; the winner is the start with the
    lowest objective, ties broken by start index.  Raises FitError with
    per-start diagnostics when no start finds a feasible point.
    """
    if law_id not in LAW_PARAMS:
        raise ValidationError(f"unknown law id {law_id!r}")
    scale = resolve_unit_scale(opts.units)
    problem = _Problem(law_id, curves, scale)
    starts = _draw_starts(law_id, opts)

    summaries: list[StartSummary] = []
    best = None  # (objective, start_index, theta, residuals, iters, status)
    for index in range(opts.n_starts):
        theta, residuals, objective, iters, status = _run_single_start(
            problem, starts[index], opts)
        summaries.append(StartSummary(index, status, iters, objective))
        if residuals is None:
            continue
        if best is None or objective < best[0]:
            best = (objective, index, theta, residuals, iters, status)

    if best is None:
        raise FitError(
            f"all {opts.n_starts} starts failed to find a feasible point "
            f"for {law_id}",
            diagnostics=[
                f"start {s.start_index}: {s.status} after {s.iterations} "
                f"iterations, objective {s.objective:.6e}"
                for s in summaries])

    objective, index, theta, residuals, iters, status = best
    unit_name = (opts.units if isinstance(opts.units, str)
                 else f"scale={opts.units!r}")
    return FitResult(
        spec=LawSpec.from_vector(law_id, theta),
        objective_value=objective,
        objective=opts.objective,
        residuals=residuals,
        iterations=iters,
        converged=(status == "converged"),
        start_index=index,
        unit_convention=f"{unit_name} (n0 and d divided by {scale:g})",
        warnings=tuple(_identifiability_warnings(problem, theta, opts)),
        n_skipped_zero_token=problem.n_skipped,
        per_start=tuple(summaries),
    )


def residual_jacobian(spec: LawSpec, curves: CurveSet,
                      units: str | float = DEFAULT_UNITS) -> np.ndarray:
    """Jacobian of residuals w.r.t. spec's parameters, one row per checkpoint.

    Rows follow run_id-sorted curve order with zero-token checkpoints
    skipped, matching FitResult.residuals.
    """
    problem = _Problem(spec.law_id, curves, resolve_unit_scale(units))
    return problem.jacobian(spec.param_vector())


def format_fit_report(result: FitResult) -> str:
    """Stable text report of a fit; no timestamps, byte-identical re-runs."""
    lines = [
        f"law: {result.spec.law_id}",
        f"units: {result.unit_convention}",
        f"fitted: {format_law_spec(result.spec)}",
        f"objective ({result.objective}): {result.objective_value:.12e}",
        f"iterations: {result.iterations}",
        f"converged: {'yes' if result.converged else 'no'}",
        f"winning start: {result.start_index}",
        f"checkpoints used: {len(result.residuals)} "
        f"(skipped at zero tokens: {result.n_skipped_zero_token})",
    ]
    for warning in result.warnings:
        lines.append(f"warning: {warning}")
    lines.append("")
    lines.append("start  status          iterations  objective")
    for s in result.per_start:
        lines.append(f"{s.start_index:>5}  {s.status:<14}  {s.iterations:>10}  "
                     f"{s.objective:.6e}")
    return "\n".join(lines)
