"""Scaling-law toolkit for post-training loss of pruned language models.

The package fits a family of loss laws to post-training curves, scores the
fits, verifies structural conditions on the fitted parameters, stress-tests
extrapolation, and predicts where a loss curve flattens.

Modules: laws (forms and derivatives), curves (file format and containers),
metrics (R^2, Huber, ASD), fitting (Levenberg-Marquardt engine), conditions
(structural checks and derivative audits), experiments (synthesis, law
comparison, generalization splits, flattening), presets (reference
parameter fixtures), cli (command-line surface).
"""

from .conditions import (
    AuditReport,
    ConditionVerdict,
    DEFAULT_GRID,
    DomainGrid,
    Witness,
    check_condition1,
    check_condition2,
    check_condition3,
    condition2_compliance,
    finite_difference_audit,
    format_compliance_table,
)
from .curves import (
    CurveSet,
    LossCurve,
    RunMeta,
    load_curves,
    save_curves,
)
from .errors import (
    BracketError,
    CurveFormatError,
    FitError,
    LawDomainError,
    LawEvaluationError,
    MetricError,
    PruneLawError,
    SplitError,
    ValidationError,
)
from .experiments import (
    ComparisonResult,
    FlatteningPoint,
    GeneralizationResult,
    SplitSpec,
    SynthSpec,
    compare_laws,
    format_comparison,
    format_flattening,
    format_generalization,
    generate_synthetic,
    predict_flattening,
    run_generalization,
    split_curves,
    write_plot_data,
)
from .fitting import (
    FitOptions,
    FitResult,
    fit,
    format_fit_report,
)
from .laws import (
    ALL_LAW_IDS,
    LawInput,
    LawSpec,
    compatible_methods,
    cross_partial,
    evaluate,
    format_law_spec,
    parse_law_spec,
    partial_wrt_tokens,
)
from .metrics import (
    MetricReport,
    asd,
    format_metric_table,
    huber,
    metric_report,
    r_squared,
)
from .presets import (
    FITTED_PARAMS,
    PRESET_IDS,
    REFERENCE_METRICS,
    fitted_spec,
    get_preset,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_LAW_IDS",
    "AuditReport",
    "BracketError",
    "ComparisonResult",
    "ConditionVerdict",
    "CurveFormatError",
    "CurveSet",
    "DEFAULT_GRID",
    "DomainGrid",
    "FITTED_PARAMS",
    "FitError",
    "FitOptions",
    "FitResult",
    "FlatteningPoint",
    "GeneralizationResult",
    "LawDomainError",
    "LawEvaluationError",
    "LawInput",
    "LawSpec",
    "LossCurve",
    "MetricError",
    "MetricReport",
    "PRESET_IDS",
    "PruneLawError",
    "REFERENCE_METRICS",
    "RunMeta",
    "SplitError",
    "SplitSpec",
    "SynthSpec",
    "ValidationError",
    "Witness",
    "asd",
    "check_condition1",
    "check_condition2",
    "check_condition3",
    "compare_laws",
    "compatible_methods",
    "condition2_compliance",
    "cross_partial",
    "evaluate",
    "finite_difference_audit",
    "fit",
    "fitted_spec",
    "format_comparison",
    "format_compliance_table",
    "format_fit_report",
    "format_flattening",
    "format_generalization",
    "format_law_spec",
    "format_metric_table",
    "generate_synthetic",
    "get_preset",
    "huber",
    "load_curves",
    "metric_report",
    "parse_law_spec",
    "partial_wrt_tokens",
    "predict_flattening",
    "r_squared",
    "run_generalization",
    "save_curves",
    "split_curves",
    "write_plot_data",
]
