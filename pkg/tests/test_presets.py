import itertools

import pytest

from prunelaw.errors import ValidationError
from prunelaw.laws import LAW_PARAMS, LawSpec
from prunelaw.presets import (
    FAMILIES,
    FITTED_PARAMS,
    LAW_LABELS,
    METHODS,
    PRESET_IDS,
    PRESETS,
    REFERENCE_METRICS,
    REFERENCE_METRICS_GENERALIZATION,
    REFERENCE_METRICS_POWER_FORMS,
    REPORTED_CONDITION2,
    fitted_spec,
    get_preset,
)


class TestFittedParams:

    def test_complete_key_product(self):
        expected = set(itertools.product(FAMILIES, METHODS, LAW_LABELS))
        assert set(FITTED_PARAMS) == expected
        assert len(FITTED_PARAMS) == 18

    def test_law_id_follows_method(self):
        for (family, method, label), spec in FITTED_PARAMS.items():
            expected = label + "_24" if method == "semi24" else label
            assert spec.law_id == expected

    def test_all_specs_are_valid(self):
        for spec in FITTED_PARAMS.values():
            assert isinstance(spec, LawSpec)
            assert set(spec.params) == set(LAW_PARAMS[spec.law_id])

    def test_llama_depth_l1_values(self):
        params = FITTED_PARAMS[("llama3", "depth", "L1")].params
        assert params == {"N_C": 0.02, "D_C": 5.94, "E": 0.14,
                          "alpha": -1.57, "beta": 0.23, "gamma": -1.08,
                          "delta": 0.29}

    def test_width_l3_delta_signs(self):
        # the one sign that separates the two width L3 verdicts
        assert FITTED_PARAMS[("llama3", "width", "L3")].params["delta"] == -0.05
        assert FITTED_PARAMS[("qwen2.5", "width", "L3")].params["delta"] == 0.02

    def test_fitted_spec_lookup(self):
        assert fitted_spec("llama3", "depth") is FITTED_PARAMS[
            ("llama3", "depth", "L1")]
        with pytest.raises(ValidationError, match="no fitted fixture"):
            fitted_spec("llama3", "depth", "L9")


class TestReportedCondition2:

    def test_pattern(self):
        for (family, method, label), holds in REPORTED_CONDITION2.items():
            if label == "L2":
                assert not holds
            elif (family, method, label) == ("llama3", "width", "L3"):
                assert not holds
            else:
                assert holds

    def test_counts(self):
        assert sum(REPORTED_CONDITION2.values()) == 11
        assert len(REPORTED_CONDITION2) == 18


class TestPresets:

    def test_id_inventory(self):
        assert len(PRESET_IDS) == 18 + 6
        assert "llama3-depth" in PRESET_IDS
        assert "qwen2.5-semi24-l3" in PRESET_IDS

    def test_bare_id_aliases_l1(self):
        assert PRESETS["llama3-depth"] is PRESETS["llama3-depth-l1"]
        assert get_preset("qwen2.5-width") is FITTED_PARAMS[
            ("qwen2.5", "width", "L1")]

    def test_unknown_id_lists_known(self):
        with pytest.raises(ValidationError, match="llama3-depth"):
            get_preset("nope")


class TestReferenceMetrics:

    def test_fit_table_covers_all_fixture_rows(self):
        assert set(REFERENCE_METRICS) == set(FITTED_PARAMS)

    def test_power_form_table_shape(self):
        assert len(REFERENCE_METRICS_POWER_FORMS) == 12
        assert all(label in ("L4", "L5")
                   for _, _, label in REFERENCE_METRICS_POWER_FORMS)

    def test_generalization_table_shape(self):
        protocols = {p for _, _, p in REFERENCE_METRICS_GENERALIZATION}
        assert protocols == {"dataset_size", "model_size", "pruning_rate"}
        assert len(REFERENCE_METRICS_GENERALIZATION) == 13

    def test_rows_are_well_formed(self):
        for table in (REFERENCE_METRICS, REFERENCE_METRICS_POWER_FORMS,
                      REFERENCE_METRICS_GENERALIZATION):
            for row in table.values():
                assert set(row) == {"r_squared", "huber", "asd"}
                assert row["r_squared"] <= 1.0
                assert row["huber"] >= 0.0 and row["asd"] >= 0.0
