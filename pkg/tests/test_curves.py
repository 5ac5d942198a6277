"""Unit tests for the curve data model, file format, and derived series."""

import numpy as np
import pytest

from prunelaw.curves import (
    CurveSet,
    LossCurve,
    RunMeta,
    compute_axis,
    load_curves,
    normalized_overlap_distance,
    normalized_relative_loss,
    relative_loss,
    save_curves,
)
from prunelaw.errors import CurveFormatError, ValidationError


def make_meta(run_id="r1", family="toy", method="depth", n0=1_000_000,
              rho=0.25, l0=2.0, n_after=None) -> RunMeta:
    if n_after is None:
        n_after = round(n0 * (1.0 - rho))
    return RunMeta(run_id, family, method, n0, rho, l0, n_after)


def make_curve(run_id="r1", tokens=(0, 100, 200, 300),
               losses=(3.0, 2.6, 2.4, 2.3), **meta_kwargs) -> LossCurve:
    return LossCurve(make_meta(run_id=run_id, **meta_kwargs),
                     np.array(tokens), np.array(losses))


class TestRunMeta:
    def test_valid_meta_accepted(self):
        make_meta()

    def test_rho_bounds(self):
        with pytest.raises(ValidationError):
            make_meta(rho=1.0)
        with pytest.raises(ValidationError):
            make_meta(rho=-0.1)
        make_meta(rho=0.0, n_after=1_000_000)  # unpruned baseline

    def test_l0_and_counts(self):
        with pytest.raises(ValidationError):
            make_meta(l0=0.0)
        with pytest.raises(ValidationError):
            make_meta(n0=0)
        with pytest.raises(ValidationError):
            make_meta(n_after=1_000_001)
        with pytest.raises(ValidationError):
            make_meta(n_after=0)

    def test_structured_pruning_proportionality(self):
        # depth/width must keep n_after within 10% of n0*(1-rho)
        with pytest.raises(ValidationError):
            make_meta(method="depth", rho=0.5, n_after=300_000)
        make_meta(method="depth", rho=0.5, n_after=530_000)
        # semi24 carries rho but is exempt from the proximity rule
        make_meta(method="semi24", rho=0.5, n_after=600_000)

    def test_bad_method_and_run_id(self):
        with pytest.raises(ValidationError):
            make_meta(method="magnitude")
        with pytest.raises(ValidationError):
            RunMeta("has space", "toy", "depth", 10, 0.2, 2.0, 8)
        with pytest.raises(ValidationError):
            RunMeta("has,comma", "toy", "depth", 10, 0.2, 2.0, 8)


class TestLossCurve:
    def test_too_few_points(self):
        with pytest.raises(ValidationError):
            make_curve(tokens=(100,), losses=(2.0,))

    def test_non_monotone_tokens(self):
        with pytest.raises(ValidationError):
            make_curve(tokens=(0, 100, 100), losses=(3.0, 2.5, 2.4))
        with pytest.raises(ValidationError):
            make_curve(tokens=(0, 200, 100), losses=(3.0, 2.5, 2.4))

    def test_bad_losses(self):
        with pytest.raises(ValidationError):
            make_curve(losses=(3.0, 2.6, float("nan"), 2.3))
        with pytest.raises(ValidationError):
            make_curve(losses=(3.0, 2.6, -0.1, 2.3))

    def test_negative_tokens(self):
        with pytest.raises(ValidationError):
            make_curve(tokens=(-1, 100, 200, 300))

    def test_points_and_immutability(self):
        curve = make_curve()
        assert curve.points[0] == (0, 3.0)
        assert len(curve) == 4
        with pytest.raises(ValueError):
            curve.tokens[0] = 5


class TestCurveSet:
    def test_sorted_by_run_id(self):
        cs = CurveSet((make_curve("b"), make_curve("a")))
        assert [c.meta.run_id for c in cs] == ["a", "b"]
        assert cs.family == "toy" and cs.method == "depth"
        assert cs.n_checkpoints == 8

    def test_duplicate_run_ids(self):
        with pytest.raises(ValidationError, match="duplicate"):
            CurveSet((make_curve("a"), make_curve("a")))

    def test_heterogeneous_set(self):
        with pytest.raises(ValidationError, match="heterogeneous"):
            CurveSet((make_curve("a", method="depth"),
                      make_curve("b", method="width")))
        with pytest.raises(ValidationError, match="heterogeneous"):
            CurveSet((make_curve("a", family="toy"),
                      make_curve("b", family="other")))

    def test_empty_set(self):
        with pytest.raises(ValidationError):
            CurveSet(())


class TestFileRoundTrip:
    def test_two_runs_round_trip_exactly(self, tmp_path):
        rng = np.random.default_rng(61)
        curves = []
        for rid in ("alpha", "beta"):
            tokens = np.cumsum(rng.integers(1, 1000, size=100))
            losses = rng.uniform(1.5, 4.0, size=100)
            curves.append(LossCurve(make_meta(run_id=rid), tokens, losses))
        original = CurveSet(tuple(curves))
        path = tmp_path / "curves.txt"
        save_curves(original, path, header_comments=("synthetic fixture",))
        loaded = load_curves(path)
        assert len(loaded) == 2
        for a, b in zip(original, loaded):
            assert a.meta == b.meta
            assert np.array_equal(a.tokens, b.tokens)
            assert np.array_equal(a.losses, b.losses)

    def test_comments_and_blank_lines_ignored(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text(
            "## a comment\n"
            "\n"
            "#run r1 family=toy method=depth n0=100 rho=0.25 l0=2.0 n_after=75\n"
            "## interleaved comment\n"
            "r1,10,2.5\n"
            "\n"
            "r1,20,2.4\n")
        cs = load_curves(path)
        assert cs.n_checkpoints == 2


class TestLoadErrors:
    def write(self, tmp_path, text):
        path = tmp_path / "bad.txt"
        path.write_text(text)
        return path

    MANIFEST = "#run r1 family=toy method=depth n0=100 rho=0.25 l0=2.0 n_after=75\n"

    def test_repeated_token_reports_line(self, tmp_path):
        path = self.write(tmp_path, self.MANIFEST
                          + "r1,5000,2.5\nr1,5000,2.4\n")
        with pytest.raises(CurveFormatError, match="non-monotone") as exc:
            load_curves(path)
        assert exc.value.line_number == 3

    def test_mixed_methods_rejected(self, tmp_path):
        path = self.write(
            tmp_path,
            self.MANIFEST
            + "#run r2 family=toy method=width n0=100 rho=0.25 l0=2.0 n_after=75\n"
            + "r1,10,2.5\nr1,20,2.4\nr2,10,2.5\nr2,20,2.4\n")
        with pytest.raises(CurveFormatError, match="heterogeneous"):
            load_curves(path)

    def test_checkpoint_before_manifest(self, tmp_path):
        path = self.write(tmp_path, "r1,10,2.5\n" + self.MANIFEST)
        with pytest.raises(CurveFormatError, match="precedes"):
            load_curves(path)

    def test_duplicate_manifest(self, tmp_path):
        path = self.write(tmp_path, self.MANIFEST + self.MANIFEST)
        with pytest.raises(CurveFormatError, match="duplicate"):
            load_curves(path)

    def test_bad_numbers_report_line(self, tmp_path):
        path = self.write(tmp_path, self.MANIFEST + "r1,10,2.5\nr1,abc,2.4\n")
        with pytest.raises(CurveFormatError) as exc:
            load_curves(path)
        assert exc.value.line_number == 3
        # tokens must be integers, not decimals
        path = self.write(tmp_path, self.MANIFEST + "r1,10.5,2.5\nr1,20,2.4\n")
        with pytest.raises(CurveFormatError):
            load_curves(path)

    def test_manifest_field_errors(self, tmp_path):
        path = self.write(
            tmp_path,
            "#run r1 family=toy method=depth n0=100 rho=0.25 l0=2.0\n")
        with pytest.raises(CurveFormatError, match="missing"):
            load_curves(path)
        path = self.write(
            tmp_path, self.MANIFEST.rstrip() + " extra=1\n")
        with pytest.raises(CurveFormatError, match="unknown"):
            load_curves(path)

    def test_empty_file(self, tmp_path):
        with pytest.raises(CurveFormatError, match="no runs"):
            load_curves(self.write(tmp_path, "## nothing here\n"))

    def test_single_checkpoint_run(self, tmp_path):
        path = self.write(tmp_path, self.MANIFEST + "r1,10,2.5\n")
        with pytest.raises(CurveFormatError, match="at least 2"):
            load_curves(path)

    def test_wrong_field_count(self, tmp_path):
        path = self.write(tmp_path, self.MANIFEST + "r1,10,2.5,extra\n")
        with pytest.raises(CurveFormatError, match="got 4 fields"):
            load_curves(path)


class TestDerivedSeries:
    def test_relative_loss_identity_case(self):
        curve = make_curve(losses=(2.0, 2.0, 2.0, 2.0), l0=2.0)
        _, delta = relative_loss(curve)
        assert np.all(delta == 0.0)

    def test_relative_loss_arithmetic(self):
        curve = make_curve(tokens=(10, 20), losses=(2.5, 2.3), l0=2.0)
        tokens, delta = relative_loss(curve)
        assert tokens.tolist() == [10, 20]
        assert delta == pytest.approx([0.5, 0.3])

    def test_adding_l0_back_is_exact(self):
        rng = np.random.default_rng(67)
        for _ in range(10):
            losses = rng.uniform(1.0, 5.0, size=20)
            curve = make_curve(tokens=np.arange(20) * 10 + 1,
                               losses=losses, l0=float(rng.uniform(0.5, 3.0)))
            _, delta = relative_loss(curve)
            assert np.array_equal(delta + curve.meta.l0, curve.losses)

    def test_normalized_gamma_zero_is_identity(self):
        curve = make_curve()
        _, delta = relative_loss(curve)
        _, norm = normalized_relative_loss(curve, gamma=0.0)
        assert np.array_equal(norm, delta)

    def test_normalized_hand_value(self):
        # delta-L 0.4 at rho=0.25, gamma=-1.08: 0.4 / 4^(-1.08)
        curve = make_curve(tokens=(10, 20), losses=(2.4, 2.4), l0=2.0,
                           rho=0.25)
        _, norm = normalized_relative_loss(curve, gamma=-1.08)
        assert norm[0] == pytest.approx(1.7876594209155519, rel=1e-14)

    def test_normalized_rejects_zero_rho(self):
        curve = make_curve(rho=0.0, n_after=1_000_000)
        with pytest.raises(ValidationError, match="zero pruning rate"):
            normalized_relative_loss(curve, gamma=-1.0)

    def test_normalized_linear_in_delta(self):
        l0, base_delta = 2.0, np.array([0.8, 0.6, 0.5, 0.45])
        scaled = {}
        for c in (1.0, 3.0):
            curve = make_curve(losses=l0 + c * base_delta, l0=l0)
            _, norm = normalized_relative_loss(curve, gamma=-1.08)
            scaled[c] = norm
        assert scaled[3.0] == pytest.approx(3.0 * scaled[1.0], rel=1e-12)

    def test_compute_axis_values(self):
        curve = make_curve(run_id="big", n0=int(1.34e9), rho=0.25,
                           n_after=int(1e9), tokens=(int(1e8), int(2e8)),
                           losses=(2.5, 2.4))
        compute, losses = compute_axis(curve)
        assert compute == pytest.approx([6e17, 1.2e18])
        assert np.array_equal(losses, curve.losses)

    def test_compute_axis_zero_and_monotone(self):
        curve = make_curve(tokens=(0, 100, 200, 300))
        compute, _ = compute_axis(curve)
        assert compute[0] == 0.0
        assert np.all(np.diff(compute) > 0)


class TestOverlapDiagnostic:
    def test_identical_curves_have_zero_distance(self):
        a = make_curve("a")
        b = make_curve("b")
        assert normalized_overlap_distance([a, b], gamma=-1.0) == 0.0

    def test_matched_power_law_curves_collapse(self):
        # Curves generated with delta-L proportional to (1/rho)^gamma
        # overlap exactly under that gamma and poorly under another.
        gamma, l0 = -1.1, 2.0
        tokens = np.arange(1, 51) * 100
        shape = 1.0 / np.sqrt(tokens)
        curves = []
        for rid, rho in (("a", 0.2), ("b", 0.5)):
            delta = (1.0 / rho) ** gamma * shape
            meta = make_meta(run_id=rid, rho=rho,
                             n_after=round(1_000_000 * (1 - rho)))
            curves.append(LossCurve(meta, tokens, l0 + delta))
        good = normalized_overlap_distance(curves, gamma=gamma)
        bad = normalized_overlap_distance(curves, gamma=0.0)
        assert good < 1e-12
        assert bad > 1e-3

    def test_disjoint_ranges_rejected(self):
        a = make_curve("a", tokens=(0, 10, 20, 30))
        b = make_curve("b", tokens=(100, 110, 120, 130))
        with pytest.raises(ValidationError, match="overlapping"):
            normalized_overlap_distance([a, b], gamma=-1.0)
