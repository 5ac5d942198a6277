"""End-to-end checks of the command-line interface: exit codes, file
outputs, determinism, config layering."""

import hashlib
import os

import pytest

from prunelaw.cli import main
from prunelaw.curves import load_curves
from prunelaw.laws import parse_law_spec


def run_cli(argv, capsys=None):
    """Invoke main() in process; fold argparse SystemExit into a code."""
    try:
        code = main(list(argv))
    except SystemExit as exc:
        code = exc.code if exc.code is not None else 0
    return code


def sha(path):
    with open(path, "rb") as handle:
        return hashlib.sha256(handle.read()).hexdigest()


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    """One zero-noise L1 curve file shared by the read-only tests."""
    out = tmp_path_factory.mktemp("synth")
    code = run_cli(["synth", "--preset", "llama3-depth", "--law", "L1",
                    "--out", str(out), "--checkpoints", "40",
                    "--seed", "7"])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def curve_file(synth_dir):
    return str(synth_dir / "synthetic.curves")


class TestHelp:
    COMMANDS = ("fit", "evaluate", "conditions", "generalize", "predict",
                "synth", "compare")

    def test_top_level_help_exits_zero(self, capsys):
        assert run_cli(["--help"]) == 0
        assert "fit" in capsys.readouterr().out

    @pytest.mark.parametrize("command", COMMANDS)
    def test_command_help_exits_zero(self, command, capsys):
        assert run_cli([command, "--help"]) == 0
        text = capsys.readouterr().out
        assert "--seed" in text
        assert "--out" in text
        assert "default" in text

    def test_unknown_command_is_usage_error(self, capsys):
        assert run_cli(["bogus"]) == 1

    def test_missing_required_flag_is_usage_error(self, capsys):
        assert run_cli(["fit", "--law", "L1"]) == 1

    def test_bad_choice_is_usage_error(self, capsys):
        assert run_cli(["fit", "--curves", "x", "--law", "L1",
                        "--units", "parsecs"]) == 1


class TestFit:
    def test_zero_noise_fit_converges_exit_zero(self, curve_file, tmp_path,
                                                capsys):
        out = tmp_path / "fit"
        code = run_cli(["fit", "--curves", curve_file, "--law", "L1",
                        "--starts", "6", "--seed", "3",
                        "--out", str(out)])
        assert code == 0
        report = (out / "fit_report.txt").read_text()
        objective_line = next(line for line in report.splitlines()
                              if line.startswith("objective"))
        assert float(objective_line.split(":")[1]) < 1e-12

    def test_parameter_file_round_trips(self, curve_file, tmp_path):
        out = tmp_path / "fit"
        run_cli(["fit", "--curves", curve_file, "--law", "L1",
                 "--starts", "6", "--seed", "3", "--out", str(out)])
        spec = parse_law_spec((out / "fitted.par").read_text().strip())
        assert spec.law_id == "L1"
        assert spec.params["D_C"] == pytest.approx(5.94, rel=1e-6)

    def test_method_mismatch_is_input_error(self, curve_file, tmp_path,
                                            capsys):
        code = run_cli(["fit", "--curves", curve_file, "--law", "L1_24",
                        "--out", str(tmp_path)])
        assert code == 1
        assert "cannot be fitted" in capsys.readouterr().err

    def test_missing_curve_file_names_the_path(self, tmp_path, capsys):
        missing = str(tmp_path / "nope.curves")
        code = run_cli(["fit", "--curves", missing, "--law", "L1",
                        "--out", str(tmp_path)])
        assert code == 1
        assert missing in capsys.readouterr().err

    def test_too_few_checkpoints_is_input_error(self, tmp_path, capsys):
        path = tmp_path / "tiny.curves"
        path.write_text(
            "#run r1 family=f method=depth n0=2000000000 rho=0.2 l0=2.8 "
            "n_after=1600000000\n"
            "r1,1000000,2.5\n"
            "r1,2000000,2.4\n"
            "r1,3000000,2.35\n")
        code = run_cli(["fit", "--curves", str(path), "--law", "L1",
                        "--out", str(tmp_path)])
        assert code == 1

    def test_fit_error_maps_to_exit_two(self, curve_file, tmp_path,
                                        monkeypatch, capsys):
        from prunelaw import cli
        from prunelaw.errors import FitError

        def explode(*args, **kwargs):
            raise FitError("no start found a feasible point")

        monkeypatch.setattr(cli, "fit", explode)
        code = run_cli(["fit", "--curves", curve_file, "--law", "L1",
                        "--out", str(tmp_path)])
        assert code == 2
        assert "fit failed" in capsys.readouterr().err


class TestConditions:
    def test_l2_preset_reports_condition2_failure(self, tmp_path, capsys):
        out = tmp_path / "cond"
        code = run_cli(["conditions", "--preset", "llama3-depth-l2",
                        "--out", str(out)])
        assert code == 0
        text = capsys.readouterr().out
        assert "condition2: ✗" in text
        assert "condition1: ✓" in text
        assert (out / "conditions.txt").read_text().strip() in text

    def test_matrix_flag_prints_fixture_table(self, tmp_path, capsys):
        code = run_cli(["conditions", "--preset", "llama3-depth",
                        "--matrix", "--out", str(tmp_path)])
        assert code == 0
        text = capsys.readouterr().out
        assert "llama3 width" in text
        assert text.count("✗") >= 7

    def test_params_and_preset_together_rejected(self, tmp_path, capsys):
        par = tmp_path / "p.par"
        par.write_text("L1: N_C=0.02, D_C=5.94, E=0.14, alpha=-1.57, "
                       "beta=0.23, gamma=-1.08, delta=0.29\n")
        code = run_cli(["conditions", "--params", str(par),
                        "--preset", "llama3-depth", "--out", str(tmp_path)])
        assert code == 1
        assert "exactly one" in capsys.readouterr().err


class TestSynth:
    def test_output_is_loadable(self, curve_file):
        curve_set = load_curves(curve_file)
        assert len(curve_set.curves) == 4
        assert curve_set.n_checkpoints == 160

    def test_rerun_same_config_is_byte_identical(self, tmp_path):
        argv = ["synth", "--preset", "llama3-depth", "--law", "L1",
                "--out", str(tmp_path), "--checkpoints", "25",
                "--seed", "11"]
        assert run_cli(argv) == 0
        first = {name: sha(tmp_path / name)
                 for name in ("run.meta", "synthetic.curves")}
        assert run_cli(argv) == 0
        second = {name: sha(tmp_path / name)
                  for name in ("run.meta", "synthetic.curves")}
        assert first == second

    def test_noise_changes_with_seed_only(self, tmp_path):
        base = ["synth", "--preset", "llama3-depth", "--checkpoints", "25",
                "--noise", "0.01"]
        for name, seed in (("a", "1"), ("b", "1"), ("c", "2")):
            run_cli(base + ["--out", str(tmp_path / name), "--seed", seed])
        curves_a = (tmp_path / "a" / "synthetic.curves").read_bytes()
        curves_b = (tmp_path / "b" / "synthetic.curves").read_bytes()
        curves_c = (tmp_path / "c" / "synthetic.curves").read_bytes()
        assert curves_a == curves_b
        assert curves_a != curves_c


class TestEvaluateAndCompare:
    def test_evaluate_writes_metrics_and_plot_data(self, curve_file,
                                                   tmp_path, capsys):
        out = tmp_path / "eval"
        code = run_cli(["evaluate", "--curves", curve_file,
                        "--preset", "llama3-depth", "--out", str(out)])
        assert code == 0
        assert "R^2" in capsys.readouterr().out
        header = (out / "plot_data.csv").read_text().splitlines()[0]
        assert header == "series_id,x,y,kind"

    def test_compare_ranks_generator_first(self, curve_file, tmp_path,
                                           capsys):
        out = tmp_path / "cmp"
        code = run_cli(["compare", "--curves", curve_file,
                        "--laws", "L1,L3", "--starts", "6", "--seed", "3",
                        "--out", str(out)])
        assert code == 0
        table = capsys.readouterr().out
        rows = [line for line in table.splitlines()
                if line.startswith(("L1", "L3"))]
        assert rows[0].startswith("L1")
        best = parse_law_spec((out / "best.par").read_text().strip())
        assert best.law_id == "L1"

    def test_compare_unknown_law_is_input_error(self, curve_file, tmp_path,
                                                capsys):
        code = run_cli(["compare", "--curves", curve_file,
                        "--laws", "L1,L9", "--out", str(tmp_path)])
        assert code == 1


class TestGeneralizePredict:
    def test_generalize_dataset_size(self, curve_file, tmp_path, capsys):
        out = tmp_path / "gen"
        code = run_cli(["generalize", "--curves", curve_file,
                        "--law", "L1", "--protocol", "dataset_size",
                        "--starts", "6", "--seed", "3", "--out", str(out)])
        assert code == 0
        text = capsys.readouterr().out
        assert "held-out" in text
        assert (out / "fitted.par").exists()
        assert (out / "plot_data.csv").exists()

    def test_predict_with_explicit_model(self, tmp_path, capsys):
        code = run_cli(["predict", "--preset", "llama3-depth",
                        "--n0", "8e9", "--rho", "0.25", "--l0", "2.5",
                        "--out", str(tmp_path)])
        assert code == 0
        text = capsys.readouterr().out
        assert "D*=" in text
        assert (tmp_path / "flattening.txt").exists()

    def test_predict_per_run_from_curves(self, curve_file, tmp_path,
                                         capsys):
        code = run_cli(["predict", "--preset", "llama3-depth",
                        "--curves", curve_file, "--out", str(tmp_path)])
        assert code == 0
        assert len(capsys.readouterr().out.strip().splitlines()) == 4

    def test_predict_without_model_is_input_error(self, tmp_path, capsys):
        code = run_cli(["predict", "--preset", "llama3-depth",
                        "--out", str(tmp_path)])
        assert code == 1
        assert "--curves or --n0" in capsys.readouterr().err


class TestConfigAndMeta:
    def test_every_command_writes_run_meta(self, curve_file, tmp_path):
        out = tmp_path / "meta"
        run_cli(["evaluate", "--curves", curve_file,
                 "--preset", "llama3-depth", "--out", str(out)])
        lines = (out / "run.meta").read_text().splitlines()
        assert lines[0] == "command=evaluate"
        keys = [line.split("=", 1)[0] for line in lines]
        assert keys[1:] == sorted(keys[1:])
        assert "seed" in keys and "units" in keys and "out" in keys

    def test_config_file_supplies_defaults_flags_override(self, curve_file,
                                                          tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("starts=5\nseed=11\n# a comment\n\n")
        out = tmp_path / "run"
        code = run_cli(["fit", "--curves", curve_file, "--law", "L1",
                        "--config", str(cfg), "--starts", "3",
                        "--out", str(out)])
        assert code == 0
        meta = (out / "run.meta").read_text()
        assert "seed=11" in meta
        assert "starts=3" in meta

    def test_malformed_config_line_is_input_error(self, curve_file,
                                                  tmp_path, capsys):
        cfg = tmp_path / "bad.txt"
        cfg.write_text("starts 5\n")
        code = run_cli(["fit", "--curves", curve_file, "--law", "L1",
                        "--config", str(cfg), "--out", str(tmp_path)])
        assert code == 1
        assert "key=value" in capsys.readouterr().err

    def test_fit_outputs_are_deterministic(self, curve_file, tmp_path):
        argv = ["fit", "--curves", curve_file, "--law", "L1",
                "--starts", "4", "--seed", "5"]
        hashes = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert run_cli(argv + ["--out", str(out)]) == 0
            hashes.append((sha(out / "fit_report.txt"),
                           sha(out / "fitted.par")))
        assert hashes[0] == hashes[1]
