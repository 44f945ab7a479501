import csv
import io

import numpy as np
import pytest

from hybridcorr import (
    ComponentSpec,
    G2Params,
    HybridSystemSpec,
    StudyConfig,
    emit_table,
    run_study,
    table_presets,
)
from hybridcorr.models import KIND_G2, KIND_HESTON
from hybridcorr.study import DT_DAILY, DT_INTRADAY, misspecified_components


class TestPresets:
    def test_g2heston_parameters(self):
        system = table_presets("g2heston")
        g2, heston = system.components
        assert g2.params == G2Params(a=0.1, b=0.2, sigma=0.01, eta=0.02, rho_xy=0.5)
        h = heston.params
        assert (h.kappa, h.theta, h.xi, h.v0, h.rho_sv) == (1.0, 0.2, 0.3, 0.1, -0.8)
        assert np.array_equal(system.full_matrix[0:2, 2:4], [[0.1, -0.2], [0.3, -0.4]])

    def test_g2g2_second_component(self):
        system = table_presets("g2g2")
        p = system.components[1].params
        assert p == G2Params(a=0.15, b=0.25, sigma=0.015, eta=0.025, rho_xy=0.55)
        assert np.array_equal(system.full_matrix[0:2, 2:4], [[0.1, 0.2], [0.3, 0.4]])

    def test_hestonheston_cross(self):
        system = table_presets("hestonheston")
        assert np.array_equal(system.full_matrix[0:2, 2:4], [[0.1, -0.2], [-0.3, 0.4]])

    def test_unknown_preset_rejected(self):
        with pytest.raises(ValueError, match="unknown preset"):
            table_presets("g3g3")

    def test_preset_matrices_are_psd(self):
        from hybridcorr import is_psd
        for name in ("g2g2", "g2heston", "hestonheston"):
            assert is_psd(table_presets(name).full_matrix)


class TestRunStudy:
    def test_small_g2g2_run_recovers_truth(self):
        config = StudyConfig(table_presets("g2g2"), n_steps=2000, dt=DT_DAILY,
                             n_trials=100, base_seed=10)
        report = run_study(config)
        assert report.entry_labels == ("0.x~1.x", "0.x~1.y", "0.y~1.x", "0.y~1.y")
        assert np.array_equal(report.true_values, [0.1, 0.2, 0.3, 0.4])
        assert report.n_failed == 0
        assert np.abs(report.bias).max() < 0.02
        assert np.all(report.stderr < 0.05)

    def test_g2g2_reports_identical_for_both_step_sizes(self):
        base = dict(n_steps=1000, n_trials=60, base_seed=3)
        intraday = run_study(StudyConfig(table_presets("g2g2"), dt=DT_INTRADAY, **base))
        daily = run_study(StudyConfig(table_presets("g2g2"), dt=DT_DAILY, **base))
        assert np.array_equal(intraday.estimates, daily.estimates)
        assert np.array_equal(intraday.bias, daily.bias)
        assert np.array_equal(intraday.stderr, daily.stderr)

    def test_heston_estimates_depend_on_step_size(self):
        base = dict(n_steps=800, n_trials=30, base_seed=4)
        intraday = run_study(StudyConfig(table_presets("hestonheston"), dt=DT_INTRADAY, **base))
        daily = run_study(StudyConfig(table_presets("hestonheston"), dt=DT_DAILY, **base))
        assert not np.array_equal(intraday.estimates, daily.estimates)

    def test_reproducible_across_parallelism(self):
        cfg1 = StudyConfig(table_presets("g2heston"), n_steps=400, n_trials=24,
                           base_seed=9, n_jobs=1)
        cfg2 = StudyConfig(table_presets("g2heston"), n_steps=400, n_trials=24,
                           base_seed=9, n_jobs=2)
        r1, r2 = run_study(cfg1), run_study(cfg2)
        assert np.array_equal(r1.estimates, r2.estimates)
        assert np.array_equal(r1.bias, r2.bias)

    def test_stderr_scales_like_inverse_sqrt_n(self):
        small = run_study(StudyConfig(table_presets("g2g2"), n_steps=100,
                                      n_trials=200, base_seed=12))
        large = run_study(StudyConfig(table_presets("g2g2"), n_steps=10_000,
                                      n_trials=200, base_seed=12))
        ratio = small.stderr / large.stderr
        assert np.all(ratio > 7.0) and np.all(ratio < 14.0)

    def test_statistical_consistency_at_n_10000(self):
        # with known parameters the pure-rate estimator is consistent: over
        # 200 trials each bias must sit within 3 MC-sigma of zero
        report = run_study(StudyConfig(table_presets("g2g2"), n_steps=10_000,
                                       n_trials=200, base_seed=21))
        bound = 3.0 * report.stderr / np.sqrt(200)
        assert np.all(np.abs(report.bias) <= bound)

    def test_misspecification_shrinks_large_correlations(self):
        config = StudyConfig(table_presets("g2g2"), n_steps=2500, n_trials=100,
                             misspec_factor=0.7, base_seed=5)
        report = run_study(config)
        t, bias_xx, _ = report.entry("0.x~1.x")
        t4, bias_yy, _ = report.entry("0.y~1.y")
        assert bias_yy < 0  # large true correlation under-estimated
        assert abs(bias_yy) > abs(bias_xx)

    def test_all_trials_failing_raises(self):
        config = StudyConfig(table_presets("g2g2"), n_steps=100, n_trials=10,
                             base_seed=1, tenor_map={0: (5.0, 5.0)})
        with pytest.raises(RuntimeError, match="failed"):
            run_study(config)

    def test_bad_config_rejected(self):
        with pytest.raises(ValueError, match="n_trials"):
            run_study(StudyConfig(table_presets("g2g2"), n_trials=1))
        with pytest.raises(ValueError, match="full correlation matrix"):
            run_study(StudyConfig(HybridSystemSpec(table_presets("g2g2").components)))

    def test_iv_proxy_flag_routes_through_square(self):
        base = dict(n_steps=500, n_trials=20, base_seed=6)
        direct = run_study(StudyConfig(table_presets("g2heston"), use_iv_proxy=False, **base))
        proxied = run_study(StudyConfig(table_presets("g2heston"), use_iv_proxy=True, **base))
        assert np.allclose(direct.estimates, proxied.estimates, atol=1e-10)

    def test_single_component_study_has_no_entries(self):
        system = HybridSystemSpec(
            (ComponentSpec(KIND_G2, G2Params(0.1, 0.2, 0.01, 0.02, 0.5)),),
            np.array([[1.0, 0.5], [0.5, 1.0]]),
        )
        report = run_study(StudyConfig(system, n_steps=50, n_trials=3))
        assert report.entry_labels == ()
        assert report.bias.size == 0


class TestMisspecifiedComponents:
    def test_scales_rate_components_only(self):
        comps = table_presets("g2heston").components
        scaled = misspecified_components(comps, 0.7)
        assert scaled[0].params.a == pytest.approx(0.07)
        assert scaled[0].params.rho_xy == pytest.approx(0.35)
        assert scaled[1].params == comps[1].params

    def test_factor_one_is_identity(self):
        comps = table_presets("g2g2").components
        assert misspecified_components(comps, 1.0) == comps


class TestEmitTable:
    def _report(self):
        return run_study(StudyConfig(table_presets("g2g2"), n_steps=200,
                                     n_trials=20, base_seed=2))

    def test_text_layout(self):
        report = self._report()
        text = emit_table(report, "text")
        lines = text.strip().split("\n")
        assert len(lines) == 3  # header, bias row, stderr row
        assert "0.x~1.x 10%" in lines[0]
        assert lines[2].strip().startswith("(")

    def test_csv_round_trip(self):
        report = self._report()
        out = emit_table(report, "csv")
        rows = list(csv.reader(io.StringIO(out)))
        assert rows[0] == ["entry", "true_value", "bias", "stderr"]
        for k, row in enumerate(rows[1:]):
            assert row[0] == report.entry_labels[k]
            assert float(row[1]) == report.true_values[k]
            assert float(row[2]) == report.bias[k]
            assert float(row[3]) == report.stderr[k]

    def test_empty_report_is_header_only(self):
        system = HybridSystemSpec(
            (ComponentSpec(KIND_G2, G2Params(0.1, 0.2, 0.01, 0.02, 0.5)),),
            np.array([[1.0, 0.5], [0.5, 1.0]]),
        )
        report = run_study(StudyConfig(system, n_steps=50, n_trials=3))
        assert emit_table(report, "csv").strip() == "entry,true_value,bias,stderr"
        assert emit_table(report, "text").strip() == "n steps"

    def test_unknown_format_rejected(self):
        with pytest.raises(ValueError, match="format"):
            emit_table(self._report(), "yaml")
