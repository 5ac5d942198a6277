"""Walkthrough: stress-test a fitted law beyond the data it was fitted on.

Three splits probe three failure axes: token horizon (dataset_size), model
scale (model_size), and pruning rate (pruning_rate).  The flattening
predictor then asks the practical question: how many tokens until more
post-training stops paying?

Run from the repository root:  python3 demos/extrapolate.py
"""

from prunelaw import (
    FitOptions,
    SplitSpec,
    SynthSpec,
    format_flattening,
    format_generalization,
    generate_synthetic,
    get_preset,
    predict_flattening,
    run_generalization,
)


def main():
    truth = get_preset("qwen2.5-depth")
    synth = SynthSpec(
        true_law=truth,
        n0_list=(0.5e9, 1.5e9, 3e9, 7e9),
        rho_list=(0.15, 0.3, 0.45),
        l0_list=(3.4, 2.9, 2.6, 2.2),
        n_checkpoints=150,
        noise_sigma=3e-3,
        rng_seed=7,
    )
    curves = generate_synthetic(synth)
    print(f"synthetic ground truth: {truth.law_id} on "
          f"{len(curves.curves)} curves\n")

    opts = FitOptions(n_starts=16, rng_seed=0)
    splits = (
        SplitSpec(protocol="dataset_size", fit_fraction=0.8),
        SplitSpec(protocol="model_size", holdout_n0=(7e9,)),
        SplitSpec(protocol="pruning_rate", holdout_rho=(0.45,)),
    )
    for split in splits:
        result = run_generalization(curves, "L1", split, opts)
        print(format_generalization(result))
        print()

    # Where does each pruned model's curve flatten?  epsilon is the slope
    # threshold in nats per billion tokens.
    print("flattening forecast (epsilon = 0.01):")
    for curve in curves.curves[:4]:
        point = predict_flattening(truth, curve.meta, epsilon=1e-2)
        print(" ", format_flattening(point))


if __name__ == "__main__":
    main()
