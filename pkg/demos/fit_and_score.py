"""Walkthrough: generate curves from a known law, fit candidates, rank them.

Run from the repository root:  python3 demos/fit_and_score.py
Writes demo_out/ with the curve file, fitted parameters, and plot data.
"""

import os

from prunelaw import (
    FitOptions,
    SynthSpec,
    compare_laws,
    format_comparison,
    format_fit_report,
    format_law_spec,
    generate_synthetic,
    get_preset,
    write_plot_data,
)


def main():
    out = "demo_out"
    os.makedirs(out, exist_ok=True)

    # The generating law: fitted parameters of a depth-pruned 1-8B family.
    truth = get_preset("llama3-depth")
    print("generating law:", format_law_spec(truth))

    synth = SynthSpec(
        true_law=truth,
        n0_list=(1e9, 3e9, 8e9),
        rho_list=(0.2, 0.35, 0.5),
        l0_list=(3.1, 2.7, 2.3),
        n_checkpoints=120,
        noise_sigma=5e-3,
        rng_seed=42,
    )
    curve_file = os.path.join(out, "depth.curves")
    curves = generate_synthetic(synth, curve_file)
    print(f"wrote {len(curves.curves)} noisy curves "
          f"({curves.n_checkpoints} checkpoints) to {curve_file}")

    # Fit three nested variants and rank them by held-in quality.
    opts = FitOptions(n_starts=16, rng_seed=0)
    result = compare_laws(curves, ["L1", "L2", "L3"], opts)
    print()
    print(format_comparison(result))

    best = result.rows[0]
    print()
    print("winner in detail:")
    print(format_fit_report(best.fit_result))

    with open(os.path.join(out, "fitted.par"), "w", encoding="utf-8") as f:
        f.write(format_law_spec(best.fit_result.spec) + "\n")
    write_plot_data(os.path.join(out, "plot_data.csv"), curves,
                    best.fit_result.spec)
    print(f"\nfitted parameters and plot data saved under {out}/")


if __name__ == "__main__":
    main()
