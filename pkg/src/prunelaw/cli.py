"""Command-line surface: fit, evaluate, conditions, generalize, predict,
synth, compare.

Exit codes: 0 success, 1 usage or input error, 2 fit failure.  Every run
writes a run.meta echo of its effective configuration into --out, and all
outputs are deterministic given --seed (no wall-clock content), so a rerun
with the same configuration is byte-identical.
"""

from __future__ import annotations

import argparse
import os
import sys

from .conditions import (
    DEFAULT_GRID,
    DomainGrid,
    check_condition1,
    check_condition2,
    check_condition3,
    condition2_compliance,
    finite_difference_audit,
    format_compliance_table,
)
from .curves import RunMeta, load_curves
from .errors import FitError, PruneLawError, ValidationError
from .experiments import (
    DEFAULT_FLATTENING_BRACKET,
    DEFAULT_FLATTENING_EPSILON,
    SplitSpec,
    SynthSpec,
    compare_laws,
    format_comparison,
    format_flattening,
    format_generalization,
    generate_synthetic,
    predict_flattening,
    run_generalization,
    write_plot_data,
)
from .fitting import FitOptions, fit, format_fit_report
from .laws import (
    ALL_LAW_IDS,
    RHO_LAWS,
    LawSpec,
    format_law_spec,
    parse_law_spec,
)
from .metrics import (
    DEFAULT_ASD_POINTS,
    DEFAULT_HUBER_DELTA,
    format_metric_table,
    metric_report,
)
from .presets import FITTED_PARAMS, PRESET_IDS, fitted_spec, get_preset

PROG = "prunelaw"


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _comma_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float "
                                         f"list: {text!r}")


def _comma_names(text: str) -> tuple[str, ...]:
    return tuple(part for part in text.split(",") if part)


def _build_parser() -> _Parser:
    parser = _Parser(prog=PROG, description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0,
                        help="seed for all randomness (default 0)")
    common.add_argument("--out", default=".",
                        help="output directory (default current)")
    common.add_argument("--units", default="billions",
                        choices=("billions", "raw"),
                        help="n0/token scaling fed to laws (default "
                             "billions)")
    common.add_argument("--config", default=None,
                        help="flat key=value file of defaults; flags "
                             "override it")

    spec_source = _Parser(add_help=False)
    spec_source.add_argument("--params", default=None,
                             help="parameter file from a previous fit")
    spec_source.add_argument("--preset", default=None,
                             help="named fixture, e.g. llama3-depth "
                                  f"(one of {len(PRESET_IDS)})")

    p = sub.add_parser("fit", parents=[common],
                       help="fit one law to a curve file")
    p.add_argument("--curves", required=True, help="curve file to fit")
    p.add_argument("--law", required=True, choices=sorted(ALL_LAW_IDS))
    p.add_argument("--starts", type=int, default=32,
                   help="multi-start count (default 32)")
    p.add_argument("--max-iterations", type=int, default=500,
                   help="iteration cap per start (default 500)")
    p.add_argument("--objective", default="squared",
                   help="squared or huber:<delta> (default squared)")

    p = sub.add_parser("evaluate", parents=[common, spec_source],
                       help="score a parameter set against a curve file")
    p.add_argument("--curves", required=True)
    p.add_argument("--law", default=None, choices=sorted(ALL_LAW_IDS),
                   help="consistency check against the loaded parameters")
    p.add_argument("--huber-delta", type=float, default=DEFAULT_HUBER_DELTA,
                   help=f"huber threshold (default {DEFAULT_HUBER_DELTA})")
    p.add_argument("--asd-points", type=int, default=DEFAULT_ASD_POINTS,
                   help=f"asd sample count (default {DEFAULT_ASD_POINTS})")

    p = sub.add_parser("conditions", parents=[common, spec_source],
                       help="verify the three structural conditions")
    p.add_argument("--law", default=None, choices=sorted(ALL_LAW_IDS))
    p.add_argument("--grid-n0", type=_comma_floats,
                   default=DEFAULT_GRID.n0_values,
                   help="grid n0 values in law units")
    p.add_argument("--grid-d", type=_comma_floats,
                   default=DEFAULT_GRID.d_values,
                   help="grid token values in law units")
    p.add_argument("--grid-rho", type=_comma_floats,
                   default=DEFAULT_GRID.rho_values,
                   help="grid pruning rates")
    p.add_argument("--h-rel", type=float, default=1e-6,
                   help="relative step for the derivative audit "
                        "(default 1e-6)")
    p.add_argument("--matrix", action="store_true",
                   help="also print the fixture compliance table")

    p = sub.add_parser("generalize", parents=[common],
                       help="fit on a split, score held-out checkpoints")
    p.add_argument("--curves", required=True)
    p.add_argument("--law", required=True, choices=sorted(ALL_LAW_IDS))
    p.add_argument("--protocol", required=True,
                   choices=("dataset_size", "model_size", "pruning_rate"))
    p.add_argument("--fraction", type=float, default=0.8,
                   help="fitting fraction for dataset_size (default 0.8)")
    p.add_argument("--holdout-n0", type=_comma_floats, default=(),
                   help="held-out model sizes (raw counts) for model_size")
    p.add_argument("--holdout-rho", type=_comma_floats, default=(),
                   help="held-out pruning rates for pruning_rate")
    p.add_argument("--starts", type=int, default=32)
    p.add_argument("--objective", default="squared",
                   help="squared or huber:<delta> (default squared)")

    p = sub.add_parser("predict", parents=[common, spec_source],
                       help="predict the flattening compute point")
    p.add_argument("--law", default=None, choices=sorted(ALL_LAW_IDS))
    p.add_argument("--curves", default=None,
                   help="predict for every run in this curve file")
    p.add_argument("--n0", type=float, default=None,
                   help="model size (raw parameter count) when no curve "
                        "file is given")
    p.add_argument("--rho", type=float, default=0.25)
    p.add_argument("--l0", type=float, default=2.5)
    p.add_argument("--n-after", type=float, default=None,
                   help="retained size (default n0*(1-rho), or n0/2 for "
                        "2:4 laws)")
    p.add_argument("--epsilon", type=float,
                   default=DEFAULT_FLATTENING_EPSILON,
                   help="slope threshold in nats per law token unit "
                        f"(default {DEFAULT_FLATTENING_EPSILON})")
    p.add_argument("--bracket-lo", type=float,
                   default=DEFAULT_FLATTENING_BRACKET[0])
    p.add_argument("--bracket-hi", type=float,
                   default=DEFAULT_FLATTENING_BRACKET[1])

    p = sub.add_parser("synth", parents=[common, spec_source],
                       help="generate synthetic curves from a law")
    p.add_argument("--law", default=None, choices=sorted(ALL_LAW_IDS))
    p.add_argument("--n0-list", type=_comma_floats, default=(2e9, 6e9))
    p.add_argument("--rho-list", type=_comma_floats, default=(0.2, 0.4))
    p.add_argument("--l0-list", type=_comma_floats, default=(2.8, 2.4))
    p.add_argument("--checkpoints", type=int, default=200)
    p.add_argument("--spacing", default="log", choices=("linear", "log"))
    p.add_argument("--token-min", type=float, default=5e7)
    p.add_argument("--token-max", type=float, default=8e9)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--method", default=None,
                   choices=("depth", "width", "semi24"))
    p.add_argument("--family", default="synthetic")
    p.add_argument("--out-file", default="synthetic.curves",
                   help="curve file name inside --out")

    p = sub.add_parser("compare", parents=[common],
                       help="fit several laws and rank them")
    p.add_argument("--curves", required=True)
    p.add_argument("--laws", required=True, type=_comma_names,
                   help="comma-separated law ids")
    p.add_argument("--starts", type=int, default=32)
    p.add_argument("--objective", default="squared",
                   help="squared or huber:<delta> (default squared)")

    return parser


# =====================================================================
# Shared plumbing
# =====================================================================

def _load_config_args(path: str) -> list[str]:
    """Turn a flat key=value file into flag tokens (booleans: true/false)."""
    tokens = []
    with open(path, encoding="utf-8") as handle:
        for raw in handle:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValidationError(
                    f"config line is not key=value: {line!r}")
            key, value = line.split("=", 1)
            key, value = key.strip(), value.strip()
            if value.lower() == "true":
                tokens.append(f"--{key}")
            elif value.lower() == "false":
                continue
            else:
                tokens.extend([f"--{key}", value])
    return tokens


def _find_config(argv: list[str]) -> str | None:
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if token.startswith("--config="):
            return token.split("=", 1)[1]
    return None


def _parse_objective(text: str) -> tuple[str, float]:
    if text == "squared":
        return "squared", DEFAULT_HUBER_DELTA
    if text.startswith("huber:"):
        try:
            delta = float(text.split(":", 1)[1])
        except ValueError:
            raise ValidationError(f"bad huber delta in {text!r}")
        return "huber", delta
    if text == "huber":
        return "huber", DEFAULT_HUBER_DELTA
    raise ValidationError(
        f"objective must be squared or huber:<delta>, got {text!r}")


def _fit_options(args) -> FitOptions:
    objective, delta = _parse_objective(args.objective)
    return FitOptions(n_starts=args.starts,
                      max_iterations=getattr(args, "max_iterations", 500),
                      rng_seed=args.seed, objective=objective,
                      huber_delta=delta, units=args.units)


def _load_spec(args) -> LawSpec:
    """Resolve --params/--preset (exactly one) and check --law agreement."""
    if (args.params is None) == (args.preset is None):
        raise ValidationError("give exactly one of --params or --preset")
    if args.params is not None:
        with open(args.params, encoding="utf-8") as handle:
            spec = parse_law_spec(handle.readline().strip())
    else:
        spec = get_preset(args.preset)
    if args.law is not None and args.law != spec.law_id:
        raise ValidationError(
            f"--law {args.law} does not match the loaded parameters "
            f"({spec.law_id})")
    return spec


def _write(args, name: str, text: str) -> str:
    path = os.path.join(args.out, name)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text if text.endswith("\n") else text + "\n")
    return path


def _write_run_meta(args) -> None:
    os.makedirs(args.out, exist_ok=True)
    skip = {"command"}
    pairs = [f"command={args.command}"]
    pairs += [f"{key}={getattr(args, key)!r}"
              for key in sorted(vars(args)) if key not in skip]
    _write(args, "run.meta", "\n".join(pairs))


def _emit(text: str) -> None:
    print(text)


# =====================================================================
# Commands
# =====================================================================

def _cmd_fit(args) -> int:
    curve_set = load_curves(args.curves)
    result = fit(args.law, curve_set, _fit_options(args))
    report = format_fit_report(result)
    _write(args, "fit_report.txt", report)
    _write(args, "fitted.par", format_law_spec(result.spec))
    _emit(report)
    return 0


def _cmd_evaluate(args) -> int:
    curve_set = load_curves(args.curves)
    spec = _load_spec(args)
    report = metric_report(curve_set, spec, huber_delta=args.huber_delta,
                           asd_n_points=args.asd_points, units=args.units)
    text = format_metric_table({spec.law_id: report})
    _write(args, "metrics.txt", text)
    write_plot_data(os.path.join(args.out, "plot_data.csv"), curve_set,
                    spec, units=args.units)
    _emit(text)
    return 0


def _verdict_block(verdict) -> list[str]:
    mark = {"holds": "✓", "fails": "✗",
            "not-applicable": "n/a"}[verdict.verdict]
    lines = [f"{verdict.condition}: {mark} ({verdict.verdict})"]
    if verdict.analytic_sign:
        lines.append(f"  analytic: {verdict.analytic_sign}")
    lines.append(f"  {verdict.detail}")
    if verdict.witnesses:
        w = verdict.witnesses[0]
        lines.append(
            f"  {len(verdict.witnesses)} witness point(s); first: "
            f"n0={w.n0:g} d={w.d:g} rho={w.rho:g} value={w.value:.6g} "
            f"[{w.kind}]")
    return lines


def _cmd_conditions(args) -> int:
    spec = _load_spec(args)
    grid = DomainGrid(n0_values=args.grid_n0, d_values=args.grid_d,
                      rho_values=args.grid_rho)
    lines = [f"law: {format_law_spec(spec)}", ""]
    lines += _verdict_block(check_condition1(spec, grid))
    lines += _verdict_block(check_condition2(spec, grid))
    lines += _verdict_block(check_condition3(spec))
    audit = finite_difference_audit(spec, grid, h_rel=args.h_rel)
    lines.append(
        f"derivative audit: max discrepancy {audit.max_discrepancy:.3e} "
        f"({audit.worst_kind}) over {audit.n_points} points, "
        f"{len(audit.failures)} evaluation failures")
    if args.matrix:
        fixture_specs = {key: fitted_spec(*key) for key in FITTED_PARAMS}
        lines += ["", "fixture compliance:",
                  format_compliance_table(
                      condition2_compliance(fixture_specs, grid))]
    text = "\n".join(lines)
    _write(args, "conditions.txt", text)
    _emit(text)
    return 0


def _cmd_generalize(args) -> int:
    curve_set = load_curves(args.curves)
    split = SplitSpec(protocol=args.protocol, fit_fraction=args.fraction,
                      holdout_n0=args.holdout_n0,
                      holdout_rho=args.holdout_rho)
    result = run_generalization(curve_set, args.law, split,
                                _fit_options(args))
    text = format_generalization(result)
    _write(args, "generalization.txt", text)
    _write(args, "fitted.par", format_law_spec(result.fit_result.spec))
    write_plot_data(os.path.join(args.out, "plot_data.csv"), curve_set,
                    result.fit_result.spec, units=args.units)
    _emit(text)
    return 0


def _cmd_predict(args) -> int:
    spec = _load_spec(args)
    metas = []
    if args.curves is not None:
        metas = [curve.meta for curve in load_curves(args.curves)]
    else:
        if args.n0 is None:
            raise ValidationError("predict needs --curves or --n0")
        if spec.law_id in RHO_LAWS:
            method = "depth"
            default_after = args.n0 * (1 - args.rho)
        else:
            method = "semi24"
            default_after = args.n0 / 2
        n_after = args.n_after if args.n_after is not None else default_after
        metas = [RunMeta(run_id="query", family="query", method=method,
                         n0=int(args.n0), rho=args.rho, l0=args.l0,
                         n_after=int(round(n_after)))]
    lines = []
    for meta in metas:
        point = predict_flattening(
            spec, meta, epsilon=args.epsilon,
            bracket=(args.bracket_lo, args.bracket_hi), units=args.units)
        lines.append(format_flattening(point))
    text = "\n".join(lines)
    _write(args, "flattening.txt", text)
    _emit(text)
    return 0


def _cmd_synth(args) -> int:
    spec = _load_spec(args)
    synth = SynthSpec(true_law=spec, n0_list=args.n0_list,
                      rho_list=args.rho_list, l0_list=args.l0_list,
                      n_checkpoints=args.checkpoints,
                      token_spacing=args.spacing,
                      token_min=args.token_min, token_max=args.token_max,
                      noise_sigma=args.noise, rng_seed=args.seed,
                      method=args.method, family=args.family,
                      units=args.units)
    path = os.path.join(args.out, args.out_file)
    curve_set = generate_synthetic(synth, path)
    text = (f"wrote {len(curve_set.curves)} curves "
            f"({curve_set.n_checkpoints} checkpoints) to {path}")
    _emit(text)
    return 0


def _cmd_compare(args) -> int:
    unknown = [law for law in args.laws if law not in ALL_LAW_IDS]
    if unknown:
        raise ValidationError(f"unknown law id(s): {', '.join(unknown)}")
    curve_set = load_curves(args.curves)
    result = compare_laws(curve_set, args.laws, _fit_options(args))
    text = format_comparison(result)
    _write(args, "comparison.txt", text)
    if result.rows:
        best = result.rows[0]
        _write(args, "best.par", format_law_spec(best.fit_result.spec))
        write_plot_data(os.path.join(args.out, "plot_data.csv"), curve_set,
                        best.fit_result.spec, units=args.units)
    _emit(text)
    return 0


_COMMANDS = {
    "fit": _cmd_fit,
    "evaluate": _cmd_evaluate,
    "conditions": _cmd_conditions,
    "generalize": _cmd_generalize,
    "predict": _cmd_predict,
    "synth": _cmd_synth,
    "compare": _cmd_compare,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    config_path = _find_config(argv)
    if config_path is not None and argv:
        try:
            injected = _load_config_args(config_path)
        except (OSError, PruneLawError) as exc:
            print(f"{PROG}: error: {exc}", file=sys.stderr)
            return 1
        # config supplies defaults; later (user) tokens win in argparse
        argv = [argv[0]] + injected + argv[1:]
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        _write_run_meta(args)
        return _COMMANDS[args.command](args)
    except FitError as exc:
        print(f"{PROG}: fit failed: {exc}", file=sys.stderr)
        return 2
    except PruneLawError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
