import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.core.errors import ConfigurationError
from src.simulate.experiment import (
    AVERAGE_ROW, BASE_CELL, PLANS, base_forecasts, cell_names, constrained_win_share, resolve_plan, run_experiment,
)
from src.simulate.scenarios import (
    SimulationConfig, generate, generate_scenario1, generate_scenario2, scenario2_noise, simulate_bottom,
    simulation_hierarchy,
)


def quiet_config(**overrides):
    """Every source of randomness switched off"""
    settings = dict(sigma_e2=0.0, sigma_eps2=0.0, sigma_omega2=0.0,
                    sigma0=np.zeros((4, 4)), sigma1=np.zeros((4, 4)))
    settings.update(overrides)
    return SimulationConfig(**settings)


def small_config(**overrides):
    settings = dict(t_total=96, horizon=12, replications=3, seed=7)
    settings.update(overrides)
    return SimulationConfig(**settings)


class TestScenarioOne:
    def test_zero_noise_gives_zero_series(self):
        assert_array_equal(generate_scenario1(quiet_config(), np.random.default_rng(1)), 0.0)

    def test_aggregation_is_exact(self):
        data = generate_scenario1(SimulationConfig(), np.random.default_rng(3))
        assert data.shape == (7, 324)
        assert_array_equal(data[0], data[1] + data[2])
        assert_array_equal(data[1], data[3] + data[4])
        assert_array_equal(data[2], data[5] + data[6])
        assert_allclose(data[0], data[3:].sum(axis=0), rtol=1e-12, atol=1e-9)

    def test_same_seed_same_panel(self):
        cfg = SimulationConfig()
        first = generate(cfg, np.random.default_rng(11))
        second = generate(cfg, np.random.default_rng(11))
        assert_array_equal(first, second)

    def test_innovation_correlation(self):
        components = simulate_bottom(SimulationConfig(t_total=20000), np.random.default_rng(5))
        correlation = np.corrcoef(components.innovations[0], components.innovations[1])[0, 1]
        assert correlation == pytest.approx(-2.0 / 3.0, abs=0.05)

    def test_components_add_up(self):
        components = simulate_bottom(SimulationConfig(), np.random.default_rng(9))
        assert_array_equal(components.bottoms, components.trend + components.seasonal + components.noise)
        assert set(components.ar_orders) <= {0, 1}
        assert set(components.ma_orders) <= {0, 1}

    def test_seasonal_windows_sum_to_disturbance_scale(self):
        cfg = SimulationConfig(t_total=2000, sigma_e2=0.0, sigma_eps2=0.0)
        seasonal = simulate_bottom(cfg, np.random.default_rng(4)).seasonal[0]
        window_sums = np.convolve(seasonal, np.ones(12), mode="valid")
        assert np.std(window_sums) == pytest.approx(np.sqrt(cfg.sigma_omega2), rel=0.15)

    def test_hierarchy(self):
        h = simulation_hierarchy()
        assert h.labels == ("Total", "A", "B", "AA", "AB", "BA", "BB")


class TestScenarioTwo:
    def test_reduces_to_scenario_one_without_extra_noise(self):
        cfg = SimulationConfig(scenario="two", scenario2_v_var=0.0, scenario2_omega_var=0.0)
        assert_array_equal(generate_scenario2(cfg, np.random.default_rng(2)),
                           generate_scenario1(cfg, np.random.default_rng(2)))

    def test_signed_noise(self):
        cfg = SimulationConfig(scenario="two")
        noise = scenario2_noise(cfg, np.random.default_rng(8))
        replay = np.random.default_rng(8)
        v = replay.standard_normal(cfg.t_total) * np.sqrt(10.0)
        omega = replay.standard_normal(cfg.t_total) * np.sqrt(9.0)
        assert_allclose(noise[0], -v - 0.5 * omega)
        assert_allclose(noise[1], v - 0.5 * omega)
        assert_allclose(noise[2], -v + 0.5 * omega)
        assert_allclose(noise[3], v - 0.5 * omega)
        assert_allclose(noise[0] + noise[2], -2.0 * v)

    def test_bottom_noise_variance(self):
        cfg = SimulationConfig(scenario="two", t_total=324 * 50)
        noise = scenario2_noise(cfg, np.random.default_rng(6))
        assert np.var(noise[0]) == pytest.approx(12.25, rel=0.1)


class TestConfig:
    @pytest.mark.parametrize("overrides, message", [
        ({"scenario": "three"}, "Unknown scenario"),
        ({"sigma_e2": -1.0}, "non-negative"),
        ({"t_total": 40}, "must exceed"),
        ({"replications": 0}, "replications"),
        ({"arma_coef_range": (0.7, 0.5)}, "ARMA"),
        ({"sigma1": -np.eye(4)}, "positive semi-definite"),
    ])
    def test_invalid(self, overrides, message):
        with pytest.raises(ConfigurationError, match=message):
            SimulationConfig(**overrides).validate()


class TestExperiment:
    def test_cell_names(self):
        assert cell_names(["ols"]) == ["Base", "ols:U", "ols:C"]
        assert cell_names(["ols"], include_nonneg=True) == ["Base", "ols:U", "ols:C", "ols:U+NN", "ols:C+NN"]

    def test_unknown_plan(self):
        with pytest.raises(ConfigurationError, match="Unknown plan"):
            resolve_plan("naive")

    def test_error_sample_shares_one_window(self):
        cfg = small_config()
        h = simulation_hierarchy()
        train = generate(cfg, np.random.default_rng(5))[:, :-cfg.horizon]
        forecasts, sample = base_forecasts(h, train, PLANS["misspecified_bottom"], cfg.horizon, cfg.season_length)
        assert forecasts.shape == (7, cfg.horizon)
        # Holt-Winters residuals start one season in, ses residuals one step in
        assert sample.errors.shape == (train.shape[1] - cfg.season_length, 7)
        assert not np.isnan(sample.errors).any()
        assert np.all(forecasts[3:] == forecasts[3:, :1])

    def test_misspecified_plan_keeps_top_at_base(self):
        result = run_experiment(small_config(scenario="two"), base_model_plan="misspecified_bottom",
                                weight_kinds=["wls_v"])
        assert result.completed == 3
        assert result.table.loc["0", "wls_v:C"] == result.table.loc["0", BASE_CELL]

    def test_top_level_constrained_equals_base(self):
        result = run_experiment(small_config(), base_model_plan="ets_arima")
        table = result.table
        assert list(table.index) == ["0", "1", "2", AVERAGE_ROW]
        assert result.completed == 3
        for kind in ("ols", "wls_s", "wls_v", "mint_shrink"):
            assert table.loc["0", f"{kind}:C"] == table.loc["0", BASE_CELL]
        for record in result.records:
            for kind in ("ols", "wls_s", "wls_v", "mint_shrink"):
                assert record["rmse"][f"{kind}:C"]["0"] == record["rmse"][BASE_CELL]["0"]

    def test_zero_noise_gives_zero_rmse(self):
        cfg = quiet_config(t_total=96, horizon=12, replications=2)
        result = run_experiment(cfg, base_model_plan="ets", weight_kinds=["ols", "wls_v"])
        assert_array_equal(result.table.to_numpy(), 0.0)

    def test_parallel_replications_match_serial(self):
        serial = run_experiment(small_config(), weight_kinds=["ols"])
        parallel = run_experiment(small_config(workers=3), weight_kinds=["ols"])
        assert_array_equal(serial.table.to_numpy(), parallel.table.to_numpy())
        assert [r["seed"] for r in parallel.records] == [7, 8, 9]

    def test_nonneg_cells(self):
        result = run_experiment(small_config(replications=1), weight_kinds=["wls_s"], include_nonneg=True)
        assert list(result.table.columns) == ["Base", "wls_s:U", "wls_s:C", "wls_s:U+NN", "wls_s:C+NN"]
        assert not result.table.isna().any().any()

    @pytest.mark.slow
    def test_constraining_the_top_helps_noisy_bottoms(self):
        cfg = SimulationConfig(scenario="two", replications=200, seed=2022)
        result = run_experiment(cfg, base_model_plan="misspecified_bottom", weight_kinds=["wls_v"])
        assert result.completed >= 190
        assert constrained_win_share(result, "wls_v") >= 0.6
