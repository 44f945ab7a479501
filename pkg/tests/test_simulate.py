import numpy as np
import pytest

from hybridcorr import (
    BatesJumpParams,
    ComponentSpec,
    G2Params,
    HestonParams,
    HybridSystemSpec,
    SimulationConfig,
    correlated_increments,
    make_rng,
    simulate_g2,
    simulate_heston,
    simulate_system,
    spot_rate_path,
    table_presets,
)
from hybridcorr.backend import available_backends
from hybridcorr.models import KIND_BATES, KIND_G2, KIND_HESTON
from hybridcorr.simulate import ou_step_stdev

P0 = G2Params(0.1, 0.2, 0.01, 0.02, 0.5)
HESTON1 = HestonParams(kappa=1.0, theta=0.2, xi=0.3, v0=0.1, rho_sv=-0.8)


def sample_corr(cols):
    return np.corrcoef(cols, rowvar=False)


class TestCorrelatedIncrements:
    def test_identity_gives_independent_columns(self):
        inc = correlated_increments(np.eye(3), 100_000, 1.0 / 250, seed=101)
        C = sample_corr(inc)
        off = C[~np.eye(3, dtype=bool)]
        assert np.abs(off).max() < 0.02

    def test_perfect_correlation_duplicates_columns(self):
        M = np.array([[1.0, 1.0], [1.0, 1.0]])
        inc = correlated_increments(M, 10_000, 0.004, seed=7)
        assert np.abs(inc[:, 0] - inc[:, 1]).max() < 1e-12

    def test_table1_matrix_recovered(self):
        system = table_presets("g2heston")
        inc = correlated_increments(system.full_matrix, 100_000, 0.004, seed=13)
        C = sample_corr(inc)
        assert np.abs(C - system.full_matrix).max() < 0.03

    def test_covariance_scales_with_dt(self):
        dt = 1.0 / 250
        inc = correlated_increments(np.eye(2), 200_000, dt, seed=3)
        var = inc.var(axis=0)
        assert np.abs(var - dt).max() < 0.02 * dt

    def test_non_psd_rejected(self):
        M = np.array([[1.0, 1.2], [1.2, 1.0]])
        with pytest.raises(ValueError, match="positive semidefinite"):
            correlated_increments(M, 10, 0.004, seed=0)

    def test_deterministic_given_seed(self):
        a = correlated_increments(np.eye(2), 500, 0.004, seed=42)
        b = correlated_increments(np.eye(2), 500, 0.004, seed=42)
        assert np.array_equal(a, b)


class TestSimulateG2:
    def test_zero_sigma_option_freezes_path(self):
        rng = make_rng(5)
        dw = rng.standard_normal((100, 2)) * 0.063
        params = G2Params(0.1, 0.2, 1e-300, 1e-300, 0.5)
        x, y = simulate_g2(params, dw[:, 0], dw[:, 1], 1.0 / 250, sigma_zero_tol=1e-250)
        assert np.array_equal(x, np.zeros(101))
        assert np.array_equal(y, np.zeros(101))

    def test_per_step_conditional_stdev(self):
        # closed form: sigma * sqrt((1 - e^{-2 a dt}) / (2a)) = 6.3232906e-4
        expect = 0.0006323290620065944
        assert ou_step_stdev(0.1, 0.01, 1.0 / 250) == pytest.approx(expect, rel=1e-12)
        dt = 1.0 / 250
        dw = make_rng(8).standard_normal(200_000) * np.sqrt(dt)
        x, _ = simulate_g2(P0, dw, dw, dt)
        resid = x[1:] - np.exp(-0.1 * dt) * x[:-1]
        assert resid.std() == pytest.approx(expect, rel=0.01)

    def test_stationary_variance_over_paths(self):
        # var(x_T) ~ sigma^2 / (2a) = 5e-4 at T = 40y
        dt, n = 1.0 / 250, 10_000
        finals = np.empty(1000)
        for p in range(1000):
            dw = make_rng(123, stream=p).standard_normal(n) * np.sqrt(dt)
            x, _ = simulate_g2(P0, dw, dw, dt)
            finals[p] = x[-1]
        target = 0.01**2 / (2 * 0.1)
        assert abs(finals.var(ddof=1) - target) < 0.05 * target

    def test_starts_at_zero(self):
        dw = make_rng(1).standard_normal((10, 2)) * 0.06
        x, y = simulate_g2(P0, dw[:, 0], dw[:, 1], 0.004)
        assert x[0] == 0.0 and y[0] == 0.0 and x.size == 11


class TestSpotRatePath:
    def test_zero_states_give_zero_rate(self):
        z = np.zeros(50)
        assert np.array_equal(spot_rate_path(z, z, P0, 5.0), z)

    def test_short_tenor_limit(self):
        rng = make_rng(3)
        x = rng.standard_normal(100).cumsum() * 0.001
        y = rng.standard_normal(100).cumsum() * 0.001
        R = spot_rate_path(x, y, P0, 1e-8)
        assert np.abs(R - (x + y)).max() < 1e-6 * np.abs(x + y).max()

    def test_worked_example(self):
        # loadings 0.951626 and 0.906346 on x = 0.01, y = 0.02
        R = spot_rate_path(np.array([0.01]), np.array([0.02]), P0, 1.0)
        assert R[0] == pytest.approx(0.027643182888605868, rel=1e-12)

    def test_linear_in_states(self):
        rng = make_rng(4)
        x = rng.standard_normal(64).cumsum()
        y = rng.standard_normal(64).cumsum()
        R1 = spot_rate_path(x, y, P0, 7.0)
        R2 = spot_rate_path(2.0 * x, 2.0 * y, P0, 7.0)
        assert np.array_equal(R2, 2.0 * R1)

    def test_bad_tenor_rejected(self):
        with pytest.raises(ValueError):
            spot_rate_path(np.zeros(3), np.zeros(3), P0, 0.0)


class TestSimulateHeston:
    def test_theta_fixed_point_with_tiny_xi(self):
        params = HestonParams(kappa=1.0, theta=0.2, xi=1e-300, v0=0.2, rho_sv=0.0)
        rng = make_rng(6)
        n = 1000
        dw = rng.standard_normal((n, 2)) * 0.002
        _, v = simulate_heston(params, None, dw[:, 0], dw[:, 1], 1.0 / 250)
        assert np.array_equal(v, np.full(n + 1, 0.2))

    def test_zero_intensity_jumps_bitwise_equal(self):
        rng = make_rng(7)
        n = 2000
        dw = rng.standard_normal((n, 2)) * 0.002
        s_plain, v_plain = simulate_heston(HESTON1, None, dw[:, 0], dw[:, 1], 1.0 / 250)
        jump = BatesJumpParams(lam=0.0, mu_j=-0.1, sigma_j=0.2)
        s_bates, v_bates = simulate_heston(
            HESTON1, jump, dw[:, 0], dw[:, 1], 1.0 / 250, rng=make_rng(8)
        )
        assert np.array_equal(s_plain, s_bates)
        assert np.array_equal(v_plain, v_bates)

    def test_cir_mean_at_four_years(self):
        # theta + (v0 - theta) e^{-kappa T} = 0.19816843611112658
        expect = 0.19816843611112658
        dt, n = 1.0 / 250, 1000
        finals = np.empty(1000)
        for p in range(1000):
            rng = make_rng(99, stream=p)
            z = rng.standard_normal((n, 2))
            rho = HESTON1.rho_sv
            dw_v = (rho * z[:, 0] + np.sqrt(1 - rho**2) * z[:, 1]) * np.sqrt(dt)
            _, v = simulate_heston(HESTON1, None, z[:, 0] * np.sqrt(dt), dw_v, dt)
            finals[p] = v[-1]
        assert abs(finals.mean() - expect) < 0.05 * expect

    def test_variance_never_negative_even_without_feller(self):
        params = HestonParams(kappa=0.5, theta=0.04, xi=1.0, v0=0.02, rho_sv=0.0)
        assert not params.feller_satisfied
        rng = make_rng(10)
        n = 20_000
        dw = rng.standard_normal((n, 2)) * np.sqrt(1.0 / 250)
        _, v = simulate_heston(params, None, dw[:, 0], dw[:, 1], 1.0 / 250)
        assert v.min() >= 0.0
        assert (v == 0.0).any()  # truncation actually engaged

    def test_jumps_touch_price_only(self):
        rng = make_rng(11)
        n = 5000
        dw = rng.standard_normal((n, 2)) * 0.002
        jump = BatesJumpParams(lam=5.0, mu_j=-0.05, sigma_j=0.1)
        s_j, v_j = simulate_heston(HESTON1, jump, dw[:, 0], dw[:, 1], 1.0 / 250, rng=make_rng(12))
        s_p, v_p = simulate_heston(HESTON1, None, dw[:, 0], dw[:, 1], 1.0 / 250)
        assert np.array_equal(v_j, v_p)
        assert not np.array_equal(s_j, s_p)

    def test_jump_without_rng_rejected(self):
        jump = BatesJumpParams(lam=1.0, mu_j=0.0, sigma_j=0.1)
        with pytest.raises(ValueError, match="rng"):
            simulate_heston(HESTON1, jump, np.zeros(5), np.zeros(5), 0.004)

    def test_short_rate_coupling_shifts_drift(self):
        n = 1000
        dw = np.zeros((n, 2))
        rate = np.full(n + 1, 0.03)
        s_coupled, _ = simulate_heston(HESTON1, None, dw[:, 0], dw[:, 1], 1.0 / 250,
                                       short_rate_path=rate)
        s_flat, _ = simulate_heston(HESTON1, None, dw[:, 0], dw[:, 1], 1.0 / 250)
        # constant rate 0.03 vs r_tilde = 0 adds 0.03 * T to the log price
        assert s_coupled[-1] - s_flat[-1] == pytest.approx(0.03 * n / 250, rel=1e-10)


class TestSimulateSystem:
    def test_bitwise_deterministic(self):
        system = table_presets("g2heston")
        cfg = SimulationConfig(n_steps=500, dt=1.0 / 250, seed=77)
        a = simulate_system(system, cfg)
        b = simulate_system(system, cfg)
        for key in a.values:
            assert np.array_equal(a.values[key], b.values[key])
        c = simulate_system(system, SimulationConfig(500, 1.0 / 250, seed=78))
        assert not np.array_equal(a.values["1.s"], c.values["1.s"])

    def test_panel_contents_g2heston(self):
        system = table_presets("g2heston")
        ps = simulate_system(system, SimulationConfig(200, 1.0 / 250, seed=1),
                             tenor_map={0: (1.0, 10.0)})
        assert set(ps.panel.keys()) == {"c0.R[1]", "c0.R[10]", "c1.s", "c1.v"}
        assert ps.panel.n_obs == 201
        assert ps.values["1.v"].min() >= 0.0

    def test_increment_correlations_recovered(self):
        system = table_presets("hestonheston")
        n = 40_000
        ps = simulate_system(system, SimulationConfig(n, 0.01 / 250, seed=21))
        # raw increments of the driving Brownians are not exposed, but the
        # log-price increments at tiny dt inherit the correlation structure
        ds0 = np.diff(ps.values["0.s"])
        ds1 = np.diff(ps.values["1.s"])
        r = np.corrcoef(ds0, ds1)[0, 1]
        assert abs(r - 0.1) < 3.0 / np.sqrt(n) + 0.02

    def test_requires_full_matrix(self):
        system = HybridSystemSpec(table_presets("g2g2").components)
        with pytest.raises(ValueError, match="full correlation matrix"):
            simulate_system(system, SimulationConfig(10, 0.004, seed=0))

    def test_coupling_requires_rate_component(self):
        system = table_presets("hestonheston")
        cfg = SimulationConfig(10, 0.004, seed=0, couple_short_rate=True)
        with pytest.raises(ValueError, match="rate component"):
            simulate_system(system, cfg)

    def test_bates_zero_intensity_matches_heston_system(self):
        base = table_presets("g2heston")
        bates = HybridSystemSpec(
            (base.components[0],
             ComponentSpec(KIND_BATES, base.components[1].params,
                           jump=BatesJumpParams(0.0, -0.1, 0.2))),
            base.full_matrix,
        )
        cfg = SimulationConfig(300, 1.0 / 250, seed=5)
        a = simulate_system(base, cfg)
        b = simulate_system(bates, cfg)
        assert np.array_equal(a.values["1.s"], b.values["1.s"])
        assert np.array_equal(a.values["1.v"], b.values["1.v"])


class TestKernelParity:
    @pytest.fixture
    def both(self):
        backends = available_backends()
        if "compiled" not in backends:
            pytest.skip("compiled kernels not built")
        return backends["compiled"], backends["python"]

    def test_ou_bitwise_equal(self, both):
        compiled, python = both
        z = make_rng(31).standard_normal(50_000)
        a = compiled.ou_exact_path(0.9996000799893344, 6.32e-4, z)
        b = python.ou_exact_path(0.9996000799893344, 6.32e-4, z)
        assert np.array_equal(a, b)

    def test_heston_bitwise_equal(self, both):
        compiled, python = both
        rng = make_rng(32)
        n = 50_000
        dw = rng.standard_normal((n, 2)) * 0.002
        base = np.full(n, -0.001)
        a = compiled.heston_full_truncation(0.0, 0.1, 0.004, 1.0, 0.2, 0.3, base, dw[:, 0], dw[:, 1])
        b = python.heston_full_truncation(0.0, 0.1, 0.004, 1.0, 0.2, 0.3, base, dw[:, 0], dw[:, 1])
        assert np.array_equal(a[0], b[0])
        assert np.array_equal(a[1], b[1])

    def test_heston_with_jumps_bitwise_equal(self, both):
        compiled, python = both
        rng = make_rng(33)
        n = 10_000
        dw = rng.standard_normal((n, 2)) * 0.002
        jumps = np.where(rng.random(n) < 0.01, rng.normal(-0.05, 0.1, n), 0.0)
        base = np.zeros(n)
        a = compiled.heston_full_truncation(0.0, 0.1, 0.004, 1.0, 0.2, 0.3, base, dw[:, 0], dw[:, 1], jumps)
        b = python.heston_full_truncation(0.0, 0.1, 0.004, 1.0, 0.2, 0.3, base, dw[:, 0], dw[:, 1], jumps)
        assert np.array_equal(a[0], b[0])
        assert np.array_equal(a[1], b[1])
