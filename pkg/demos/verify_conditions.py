"""Walkthrough: structural checks that separate usable laws from broken ones.

A law family is only trustworthy for extrapolation when more data helps
(condition 1), bigger models benefit more from data (condition 2), and the
pruning-rate prefactor acts as a pure multiplier (condition 3).

Run from the repository root:  python3 demos/verify_conditions.py
"""

from prunelaw import (
    FITTED_PARAMS,
    check_condition1,
    check_condition2,
    check_condition3,
    condition2_compliance,
    finite_difference_audit,
    fitted_spec,
    format_compliance_table,
)


def show(verdict):
    mark = {"holds": "yes", "fails": "NO", "not-applicable": "n/a"}
    line = f"  {verdict.condition}: {mark[verdict.verdict]}"
    if verdict.analytic_sign:
        line += f"  ({verdict.analytic_sign})"
    print(line)
    if verdict.witnesses:
        w = verdict.witnesses[0]
        print(f"    first violation at n0={w.n0:g} d={w.d:g} "
              f"rho={w.rho:g}: {w.value:.4g}")


def main():
    # One healthy fit and one degenerate fit from the same experiments.
    for family, method, label in (("llama3", "depth", "L1"),
                                  ("llama3", "width", "L2")):
        spec = fitted_spec(family, method, label)
        print(f"{family} {method} {label}:")
        show(check_condition1(spec))
        show(check_condition2(spec))
        show(check_condition3(spec))
        audit = finite_difference_audit(spec)
        print(f"  derivative audit: worst {audit.max_discrepancy:.2e} "
              f"({audit.worst_kind}) over {audit.n_points} grid points")
        print()

    # The full fixture table. L2 drops the model-size prefactor, so its
    # mixed derivative is identically zero and every L2 column fails.
    specs = {key: fitted_spec(*key) for key in FITTED_PARAMS}
    print("condition-2 compliance across all fitted fixtures:")
    print(format_compliance_table(condition2_compliance(specs)))


if __name__ == "__main__":
    main()
