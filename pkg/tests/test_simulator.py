"""DGP generation and Monte Carlo harness."""
import math
from dataclasses import replace

import numpy as np
import pytest

from rkpf.errors import ConfigError
from rkpf.estimation import fit_model
from rkpf.panel import descriptive_stats, validate_balanced
from rkpf.simulate import (
    DEFAULT_COEFFICIENTS,
    DgpConfig,
    generate_panel,
    monte_carlo,
)
from rkpf.suite import expand_notation


class TestDgpConfig:
    def test_defaults_valid(self):
        cfg = DgpConfig()
        assert cfg.n_regions == 78 and cfg.n_years == 12
        assert cfg.true_coefficients == DEFAULT_COEFFICIENTS
        assert len(cfg.time_effect_profile) == 12
        assert all(
            b >= a
            for a, b in zip(cfg.time_effect_profile, cfg.time_effect_profile[1:])
        )

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_regions": 2},
            {"n_years": 2},
            {"noise_sd": 0.0},
            {"region_effect_sd": -1.0},
            {"cluster_ar1": 1.0},
            {"time_effect_profile": (0.0, 1.0)},
        ],
    )
    def test_invalid_configs(self, kwargs):
        with pytest.raises(ConfigError):
            DgpConfig(**kwargs)

    def test_yaml_round_trip(self, tmp_path):
        cfg = replace(DgpConfig(seed=9), noise_sd=0.4, cluster_ar1=0.5)
        path = tmp_path / "dgp.yaml"
        cfg.to_yaml(path)
        loaded = DgpConfig.from_yaml(path)
        assert loaded == cfg

    def test_linspace_profile_section(self, tmp_path):
        path = tmp_path / "dgp.yaml"
        path.write_text(
            "panel: {n_regions: 10, n_years: 4, seed: 1}\n"
            "effects: {time_profile: {start: 0.0, stop: 0.9}}\n",
            encoding="utf-8",
        )
        cfg = DgpConfig.from_yaml(path)
        assert cfg.time_effect_profile == tuple(np.linspace(0.0, 0.9, 4))

    def test_bad_yaml(self, tmp_path):
        path = tmp_path / "dgp.yaml"
        path.write_text("panel: [unclosed", encoding="utf-8")
        with pytest.raises(ConfigError):
            DgpConfig.from_yaml(path)

    def test_non_mapping_yaml(self, tmp_path):
        path = tmp_path / "dgp.yaml"
        path.write_text("- just\n- a\n- list\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            DgpConfig.from_yaml(path)


class TestGeneratePanel:
    def test_shapes_and_balance(self):
        g = generate_panel(DgpConfig(n_regions=10, n_years=5, seed=1))
        assert g.dataset.n_regions == 10 and g.dataset.n_years == 5
        assert validate_balanced(g.dataset).passed
        assert g.weights.w.shape == (10, 10)
        for name in ("log(PUB21EMP)", "log(EXPEMP10)", "FWCI", "Q1SH", "NQSH"):
            assert name in g.dataset.variables

    def test_same_seed_bit_identical(self):
        a = generate_panel(DgpConfig(seed=7, n_regions=12, n_years=4))
        b = generate_panel(DgpConfig(seed=7, n_regions=12, n_years=4))
        for name in a.dataset.variables:
            np.testing.assert_array_equal(
                a.dataset.var(name), b.dataset.var(name)
            )
        np.testing.assert_array_equal(a.weights.w, b.weights.w)

    def test_different_seed_differs(self):
        a = generate_panel(DgpConfig(seed=1, n_regions=12, n_years=4))
        b = generate_panel(DgpConfig(seed=2, n_regions=12, n_years=4))
        assert not np.array_equal(
            a.dataset.var("log(PUB21EMP)"), b.dataset.var("log(PUB21EMP)")
        )

    def test_near_noiseless_recovery(self):
        cfg = replace(DgpConfig(n_regions=20, n_years=8, seed=3), noise_sd=1e-10)
        g = generate_panel(cfg)
        fit = fit_model(
            g.dataset, expand_notation("fe.tw.q.sl", "classical"), g.weights
        )
        for label, truth in cfg.true_coefficients.items():
            assert abs(fit.coefficients[label] - truth) < 1e-6
        assert fit.r_squared_within == pytest.approx(1.0, abs=1e-9)

    def test_default_calibration_matches_observed_range(self):
        g = generate_panel(DgpConfig(seed=0))
        stats = descriptive_stats(g.dataset, ["EXPEMP10"])["EXPEMP10"]
        for value in stats.values():
            assert 0.12 <= value <= 2.16

    def test_levels_respect_clip_bounds(self):
        cfg = DgpConfig(seed=5)
        g = generate_panel(cfg)
        for name, dist in cfg.regressor_distributions.items():
            values = g.dataset.var(name)
            assert values.min() >= dist.min_value
            assert values.max() <= dist.max_value

    def test_log_variables_consistent(self):
        g = generate_panel(DgpConfig(seed=6, n_regions=10, n_years=4))
        np.testing.assert_allclose(
            g.dataset.var("log(EXPEMP10)"), np.log(g.dataset.var("EXPEMP10"))
        )
        np.testing.assert_allclose(
            g.dataset.var("PUB21EMP"), np.exp(g.dataset.var("log(PUB21EMP)"))
        )

    def test_quality_substitution_shifts_output(self):
        base = generate_panel(replace(DgpConfig(seed=8, n_regions=8, n_years=4)))
        shifted = generate_panel(
            replace(DgpConfig(seed=8, n_regions=8, n_years=4), quality_substitution=0.3)
        )
        diff = base.dataset.var("log(PUB21EMP)") - shifted.dataset.var("log(PUB21EMP)")
        np.testing.assert_allclose(diff, 0.3, atol=1e-12)

    def test_unknown_coefficient_label_rejected(self):
        cfg = replace(
            DgpConfig(n_regions=8, n_years=4), true_coefficients={"log(NOPE)": 1.0}
        )
        with pytest.raises(ConfigError):
            generate_panel(cfg)

    def test_ar1_noise_panel_still_balanced(self):
        cfg = replace(DgpConfig(seed=4, n_regions=8, n_years=6), cluster_ar1=0.7)
        g = generate_panel(cfg)
        assert validate_balanced(g.dataset).passed


class TestMonteCarlo:
    small = DgpConfig(n_regions=20, n_years=6, seed=31)

    def test_two_replications_no_crash(self):
        report = monte_carlo(self.small, "fe.tw.q", 2)
        assert report.replications == 2
        for summary in report.terms.values():
            assert 0.0 <= summary.coverage_95 <= 1.0

    def test_single_replication_rejected(self):
        with pytest.raises(ConfigError):
            monte_carlo(self.small, "fe.tw.q", 1)

    def test_seeded_determinism(self):
        a = monte_carlo(self.small, "fe.tw.q.sl", 10)
        b = monte_carlo(self.small, "fe.tw.q.sl", 10)
        assert a.to_dict() == b.to_dict()

    def test_thread_schedule_independence(self, monkeypatch):
        serial = monte_carlo(self.small, "fe.tw.q", 8)
        monkeypatch.setenv("RKPF_THREADS", "4")
        threaded = monte_carlo(self.small, "fe.tw.q", 8)
        assert serial.to_dict() == threaded.to_dict()

    def test_bias_within_monte_carlo_noise(self):
        # |bias| < 3 * emp_sd / sqrt(reps) for the headline elasticity
        report = monte_carlo(DgpConfig(n_regions=40, n_years=8, seed=13), "fe.tw.q.sl", 60)
        s = report.terms["log(EXPEMP10)"]
        assert abs(s.bias) < 3.0 * s.empirical_sd / math.sqrt(report.replications)

    def test_tracked_terms_are_spec_terms_with_truth(self):
        report = monte_carlo(self.small, "fe.tw.q.sl.non", 2)
        assert "NQSH" not in report.terms
        assert "slNQSH" not in report.terms
        assert "Q1SH" in report.terms
        assert set(report.terms) <= set(DEFAULT_COEFFICIENTS)

    def test_report_render(self):
        report = monte_carlo(self.small, "fe.tw.q", 3)
        text = report.render_text()
        assert "replications" in text
        assert "log(EXPEMP10)" in text

    def test_clustered_noise_favors_cluster_robust_coverage(self):
        # AR(1) errors within region: the cluster sandwich should land
        # closer to nominal 95% than the classical covariance
        cfg = replace(DgpConfig(seed=11), cluster_ar1=0.7)
        classical = monte_carlo(cfg, "fe.tw.q.sl", 200, covariance="classical")
        robust = monte_carlo(cfg, "fe.tw.q.sl", 200, covariance="cluster_by_region")
        c = classical.terms["log(EXPEMP10)"].coverage_95
        r = robust.terms["log(EXPEMP10)"].coverage_95
        assert abs(r - 0.95) < abs(c - 0.95)

    def test_single_draw_elasticity_in_interval(self):
        # one dataset with elasticity 0.5: the two-way FE estimate's 95%
        # interval contains the truth (frozen seed; the statistical version
        # lives in the acceptance suite)
        coefs = dict(DEFAULT_COEFFICIENTS)
        coefs["log(EXPEMP10)"] = 0.5
        cfg = replace(DgpConfig(seed=11), true_coefficients=coefs)
        g = generate_panel(cfg)
        fit = fit_model(g.dataset, expand_notation("fe.tw.q.sl"), g.weights)
        low, high = fit.conf_int("log(EXPEMP10)")
        assert low <= 0.5 <= high
