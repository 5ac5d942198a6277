"""Loss-curve data model, file ingestion, and derived series.

A curve file is plain UTF-8 text with LF endings and two record kinds:

    #run <run_id> family=<s> method=<depth|width|semi24> n0=<int> rho=<float> l0=<float> n_after=<int>
    <run_id>,<tokens:int>,<loss:float>

Lines starting with ``##`` are comments; blank lines are ignored.  A run's
manifest must precede its checkpoints.  All numbers use '.' as the decimal
separator and no thousands separators.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import CurveFormatError, ValidationError

VALID_METHODS = ("depth", "width", "semi24")


def _frozen_array(values, dtype) -> np.ndarray:
    arr = np.asarray(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RunMeta:
    """Identity and pruning context of one post-training run."""

    run_id: str
    family: str
    method: str
    n0: int
    rho: float
    l0: float
    n_after: int

    def __post_init__(self):
        if not self.run_id or any(c in self.run_id for c in ", \t\n"):
            raise ValidationError(f"run_id {self.run_id!r} must be non-empty "
                                  "and free of commas/whitespace")
        if self.method not in VALID_METHODS:
            raise ValidationError(f"method must be one of {VALID_METHODS}, "
                                  f"got {self.method!r}")
        if self.n0 <= 0:
            raise ValidationError("n0 must be > 0")
        if not 0.0 <= self.rho < 1.0:
            raise ValidationError(f"rho must lie in [0, 1), got {self.rho}")
        if not self.l0 > 0:
            raise ValidationError("l0 must be > 0")
        if not 0 < self.n_after <= self.n0:
            raise ValidationError("n_after must satisfy 0 < n_after <= n0")
        if self.method in ("depth", "width"):
            # Structured pruning removes whole layers/channels, so the
            # retained count only tracks n0*(1-rho) approximately.
            expected = self.n0 * (1.0 - self.rho)
            if abs(self.n_after - expected) > 0.10 * expected:
                raise ValidationError(
                    f"n_after={self.n_after} deviates more than 10% from "
                    f"n0*(1-rho)={expected:.0f} for method={self.method}")


@dataclass(frozen=True)
class LossCurve:
    """One run's loss trajectory over post-training tokens."""

    meta: RunMeta
    tokens: np.ndarray = field(repr=False)
    losses: np.ndarray = field(repr=False)

    def __post_init__(self):
        tokens = _frozen_array(self.tokens, np.int64)
        losses = _frozen_array(self.losses, np.float64)
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "losses", losses)
        if tokens.ndim != 1 or tokens.shape != losses.shape:
            raise ValidationError("tokens and losses must be 1-d and equal length")
        if len(tokens) < 2:
            raise ValidationError(
                f"run {self.meta.run_id!r} has {len(tokens)} checkpoints; "
                "at least 2 are required")
        if tokens[0] < 0:
            raise ValidationError("token counts must be >= 0")
        if np.any(np.diff(tokens) <= 0):
            raise ValidationError(
                f"run {self.meta.run_id!r} has non-monotone token counts")
        if not np.all(np.isfinite(losses)) or np.any(losses <= 0):
            raise ValidationError(
                f"run {self.meta.run_id!r} has non-finite or non-positive losses")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def points(self) -> list[tuple[int, float]]:
        return list(zip(self.tokens.tolist(), self.losses.tolist()))


@dataclass(frozen=True)
class CurveSet:
    """All curves of one (family, method) pair, sorted by run_id.

    Sorting at construction makes every downstream computation invariant to
    the order runs appear in a file.
    """

    curves: tuple[LossCurve, ...]

    def __post_init__(self):
        curves = tuple(sorted(self.curves, key=lambda c: c.meta.run_id))
        object.__setattr__(self, "curves", curves)
        if not curves:
            raise ValidationError("a curve set must contain at least one curve")
        ids = [c.meta.run_id for c in curves]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate run_id(s): {dupes}")
        keys = {(c.meta.family, c.meta.method) for c in curves}
        if len(keys) > 1:
            raise ValidationError(
                f"heterogeneous curve set: found {sorted(keys)}")

    @property
    def family(self) -> str:
        return self.curves[0].meta.family

    @property
    def method(self) -> str:
        return self.curves[0].meta.method

    @property
    def n_checkpoints(self) -> int:
        return sum(len(c) for c in self.curves)

    def __len__(self) -> int:
        return len(self.curves)

    def __iter__(self):
        return iter(self.curves)


# =====================================================================
# File ingestion
# =====================================================================

def _parse_manifest(line: str, lineno: int) -> RunMeta:
    parts = line.split()
    if len(parts) < 2:
        raise CurveFormatError("manifest line missing run_id", lineno)
    fields: dict[str, str] = {}
    for item in parts[2:]:
        key, eq, value = item.partition("=")
        if not eq:
            raise CurveFormatError(f"malformed manifest field {item!r}", lineno)
        fields[key] = value
    required = ("family", "method", "n0", "rho", "l0", "n_after")
    missing = [k for k in required if k not in fields]
    if missing:
        raise CurveFormatError(f"manifest missing fields {missing}", lineno)
    extra = [k for k in fields if k not in required]
    if extra:
        raise CurveFormatError(f"unknown manifest fields {extra}", lineno)
    try:
        meta = RunMeta(
            run_id=parts[1],
            family=fields["family"],
            method=fields["method"],
            n0=int(fields["n0"]),
            rho=float(fields["rho"]),
            l0=float(fields["l0"]),
            n_after=int(fields["n_after"]),
        )
    except ValidationError as exc:
        raise CurveFormatError(str(exc), lineno) from exc
    except ValueError as exc:
        raise CurveFormatError(f"bad number in manifest: {exc}", lineno) from exc
    return meta


def load_curves(path: str | os.PathLike) -> CurveSet:
    """Parse and validate a curve file into a CurveSet."""
    metas: dict[str, RunMeta] = {}
    tokens: dict[str, list[int]] = {}
    losses: dict[str, list[float]] = {}
    with open(path, encoding="utf-8", newline="") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if "\r" in line:
                raise CurveFormatError("CR found; curve files use LF endings",
                                       lineno)
            if not line.strip() or line.startswith("##"):
                continue
            if line.startswith("#run"):
                meta = _parse_manifest(line, lineno)
                if meta.run_id in metas:
                    raise CurveFormatError(
                        f"duplicate run_id {meta.run_id!r}", lineno)
                metas[meta.run_id] = meta
                tokens[meta.run_id] = []
                losses[meta.run_id] = []
                continue
            if line.startswith("#"):
                raise CurveFormatError(
                    f"unrecognized directive {line.split()[0]!r}", lineno)
            cells = line.split(",")
            if len(cells) != 3:
                raise CurveFormatError(
                    f"checkpoint needs run_id,tokens,loss; got {len(cells)} fields",
                    lineno)
            run_id = cells[0]
            if run_id not in metas:
                raise CurveFormatError(
                    f"checkpoint for {run_id!r} precedes its manifest", lineno)
            try:
                tok = int(cells[1])
                loss = float(cells[2])
            except ValueError as exc:
                raise CurveFormatError(f"bad number: {exc}", lineno) from exc
            prior = tokens[run_id]
            if prior and tok <= prior[-1]:
                raise CurveFormatError(
                    f"non-monotone tokens for run {run_id!r}", lineno)
            if not np.isfinite(loss) or loss <= 0:
                raise CurveFormatError(
                    f"loss must be finite and > 0, got {cells[2]}", lineno)
            prior.append(tok)
            losses[run_id].append(loss)
    if not metas:
        raise CurveFormatError("file contains no runs")
    try:
        curves = tuple(
            LossCurve(meta, tokens[rid], losses[rid])
            for rid, meta in metas.items()
        )
        return CurveSet(curves)
    except ValidationError as exc:
        raise CurveFormatError(str(exc)) from exc


def save_curves(curve_set: CurveSet, path: str | os.PathLike,
                header_comments: tuple[str, ...] = ()) -> None:
    """Write a CurveSet in the curve-file format; inverse of load_curves."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for comment in header_comments:
            handle.write(f"## {comment}\n")
        for curve in curve_set:
            m = curve.meta
            handle.write(
                f"#run {m.run_id} family={m.family} method={m.method} "
                f"n0={m.n0} rho={m.rho!r} l0={m.l0!r} n_after={m.n_after}\n")
            for tok, loss in zip(curve.tokens.tolist(), curve.losses.tolist()):
                handle.write(f"{m.run_id},{tok},{loss!r}\n")


# =====================================================================
# Derived series
# =====================================================================

def relative_loss(curve: LossCurve) -> tuple[np.ndarray, np.ndarray]:
    """(tokens, loss - l0) pointwise."""
    return curve.tokens.copy(), curve.losses - curve.meta.l0


def normalized_relative_loss(
        curve: LossCurve, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """(tokens, (loss - l0) / (1/rho)^gamma)."""
    if curve.meta.rho == 0.0:
        raise ValidationError("normalization undefined at zero pruning rate")
    if not np.isfinite(gamma):
        raise ValidationError("gamma must be finite")
    tokens, delta = relative_loss(curve)
    return tokens, delta / (1.0 / curve.meta.rho) ** gamma


def compute_axis(curve: LossCurve) -> tuple[np.ndarray, np.ndarray]:
    """(6 * n_after * tokens, loss): floating-point compute axis."""
    compute = 6.0 * float(curve.meta.n_after) * curve.tokens.astype(np.float64)
    return compute, curve.losses.copy()


def normalized_overlap_distance(curves, gamma: float,
                                n_grid: int = 100) -> float:
    """Max pairwise sup-distance between normalized relative-loss series.

    Series are linearly interpolated onto a token grid spanning the overlap
    of all curves' recorded ranges.  Descriptive statistic for eyeballing
    how well one gamma collapses curves at different pruning rates; small
    is better, but no threshold is implied.
    """
    curves = list(curves)
    if len(curves) < 2:
        raise ValidationError("overlap distance needs at least two curves")
    lo = max(float(c.tokens[0]) for c in curves)
    hi = min(float(c.tokens[-1]) for c in curves)
    if not lo < hi:
        raise ValidationError("curves have no overlapping token range")
    grid = np.linspace(lo, hi, n_grid)
    interped = []
    for curve in curves:
        tokens, norm = normalized_relative_loss(curve, gamma)
        interped.append(np.interp(grid, tokens.astype(float), norm))
    worst = 0.0
    for i in range(len(interped)):
        for j in range(i + 1, len(interped)):
            worst = max(worst, float(np.max(np.abs(interped[i] - interped[j]))))
    return worst
