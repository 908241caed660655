import math

import numpy as np
import pytest
from scipy import stats

from irspca import (ConfigError, ContractError, RngStream, ScenarioConfig,
                    attack_amplitudes, build_scenario, reflection_matrices,
                    rpt_observation, sample_block)


def small_cfg(**kw) -> ScenarioConfig:
    base = dict(M=8, J=3, tau_p=16)
    base.update(kw)
    return ScenarioConfig(**base)


class TestBuildScenario:
    def test_geometry_and_path_loss(self):
        s = build_scenario(ScenarioConfig(d1=150.0, d2=20.0))
        d_ba = math.hypot(150.0, 20.0)
        assert d_ba == pytest.approx(151.327, abs=1e-3)
        assert s.g_b == pytest.approx(d_ba ** -4, rel=1e-12)
        assert s.g_b == pytest.approx(1.907e-9, rel=1e-3)

    def test_snr_normalization_is_exact(self):
        s = build_scenario(ScenarioConfig(snr_b_target_db=0.0))
        assert s.P_a * s.g_b / s.sigma_b_sq == pytest.approx(1.0, rel=1e-12)
        s6 = build_scenario(ScenarioConfig(snr_b_target_db=6.0))
        assert s6.P_a * s6.g_b / s6.sigma_b_sq == pytest.approx(
            10 ** 0.6, rel=1e-12)

    def test_zero_radius_collapses_cooperative_nodes(self):
        s = build_scenario(small_cfg(Rc=0.0))
        assert np.allclose(s.cn_positions, s.cn_positions[0])
        assert np.allclose(s.g_j, s.g_j[0])

    def test_sigma0_definition(self):
        s = build_scenario(ScenarioConfig())
        expected = 1.0 + s.sigma_a_sq / (s.a_b ** 2 * s.cfg.tau_p)
        assert s.sigma0_sq == pytest.approx(expected, rel=1e-14)

    def test_pilots_orthogonal_and_normalized(self):
        s = build_scenario(small_cfg())
        tau = s.cfg.tau_p
        assert np.linalg.norm(s.u) ** 2 == pytest.approx(tau, rel=1e-12)
        for j in range(s.cfg.J):
            assert np.linalg.norm(s.v[j]) ** 2 == pytest.approx(tau, rel=1e-12)
            assert abs(np.vdot(s.u, s.v[j])) < 1e-9 * tau
            for i in range(j):
                assert abs(np.vdot(s.v[i], s.v[j])) < 1e-9 * tau

    def test_same_seed_reproduces_cn_layout(self):
        a = build_scenario(small_cfg(seed=5))
        b = build_scenario(small_cfg(seed=5))
        assert np.array_equal(a.cn_positions, b.cn_positions)
        c = build_scenario(small_cfg(seed=6))
        assert not np.array_equal(a.cn_positions, c.cn_positions)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            build_scenario(ScenarioConfig(d1=-1.0))
        with pytest.raises(ConfigError):
            build_scenario(ScenarioConfig(r_p=1.5))
        with pytest.raises(ConfigError):
            build_scenario(ScenarioConfig(J=64, tau_p=64))
        with pytest.raises(ConfigError):
            build_scenario(ScenarioConfig(nu=0))


class TestReflectionMatrices:
    def setup_method(self):
        s = build_scenario(small_cfg())
        self.omegas = (s.omega_a, s.omega_b, s.omega_e)

    def test_zero_amplitude(self):
        phi_p, _ = reflection_matrices(*self.omegas, 0.0, 1.0)
        assert np.all(phi_p == 0)

    def test_unit_amplitude_modulus(self):
        phi_p, phi_d = reflection_matrices(*self.omegas, 1.0, 0.7)
        assert np.allclose(np.abs(phi_p), 1.0, atol=1e-12)
        assert np.allclose(np.abs(phi_d), 0.7, atol=1e-12)

    def test_aligned_cascade_gain(self):
        oa, ob, _ = self.omegas
        for r_p in (0.3, 1.0):
            phi_p, _ = reflection_matrices(*self.omegas, r_p, 1.0)
            gain = np.sum(np.conj(oa) * phi_p * ob)
            assert abs(gain) == pytest.approx(r_p * len(oa), rel=1e-12)

    def test_amplitude_contract(self):
        with pytest.raises(ContractError):
            reflection_matrices(*self.omegas, 1.2, 0.5)


class TestAttackAmplitudes:
    def test_zero_reflection_kills_attack(self):
        s = build_scenario(small_cfg(r_p=0.0))
        a_hat, _, mu = attack_amplitudes(s)
        assert a_hat == 0
        assert mu == 0

    def test_aligned_magnitude(self):
        s = build_scenario(ScenarioConfig(r_p=0.6))
        a_hat, _, _ = attack_amplitudes(s)
        expected = math.sqrt(s.g_I / s.g_b) * 0.6 * s.N * math.sqrt(s.h_bI)
        assert abs(a_hat) == pytest.approx(expected, rel=1e-12)

    def test_mu_quadratic_in_reflection(self):
        lo = build_scenario(ScenarioConfig(r_p=0.25))
        hi = build_scenario(ScenarioConfig(r_p=0.5))
        assert hi.mu == pytest.approx(4.0 * lo.mu, rel=1e-9)

    def test_homogeneous_in_bob_power(self):
        a = build_scenario(ScenarioConfig(P_b_dbm=20.0))
        b = build_scenario(ScenarioConfig(P_b_dbm=35.0))
        aa, _, _ = attack_amplitudes(a)
        bb, _, _ = attack_amplitudes(b)
        assert aa == pytest.approx(bb, rel=1e-9)

    def test_matches_build_time_values(self):
        s = build_scenario(ScenarioConfig(r_p=0.8, r_d=0.4))
        a_hat, a_tilde, mu = attack_amplitudes(s)
        assert a_hat == pytest.approx(s.a_hat_I, rel=1e-12)
        assert a_tilde == pytest.approx(s.a_tilde_I, rel=1e-12)
        assert mu == pytest.approx(s.mu, rel=1e-12)


class TestSampleBlock:
    def test_unit_fading_variance(self):
        s = build_scenario(small_cfg())
        gen = RngStream(42, 0).generator()
        acc = []
        for _ in range(2000):
            acc.append(sample_block(s, gen).h_b)
        var = np.mean(np.abs(np.stack(acc)) ** 2)
        n = 2000 * s.cfg.M
        assert abs(var - 1.0) <= 3.0 / math.sqrt(n)

    def test_distinct_streams_uncorrelated(self):
        s = build_scenario(small_cfg())
        gen_a = RngStream(1, 10).generator()
        gen_b = RngStream(1, 11).generator()
        blocks = 100_000 // s.cfg.M
        xa = np.concatenate([sample_block(s, gen_a).h_b for _ in range(blocks)])
        xb = np.concatenate([sample_block(s, gen_b).h_b for _ in range(blocks)])
        corr = np.corrcoef(xa.real, xb.real)[0, 1]
        assert abs(corr) < 0.02

    def test_rpt_noise_variance(self):
        s = build_scenario(small_cfg())
        gen = RngStream(3, 0).generator()
        zs = np.stack([sample_block(s, gen).z for _ in range(2000)])
        var = np.mean(np.abs(zs) ** 2)
        n = zs.size
        assert var == pytest.approx(s.rpt_noise_var,
                                    abs=4.0 * s.rpt_noise_var / math.sqrt(n))

    def test_randomized_phi_varies_per_block(self):
        s = build_scenario(small_cfg(randomize_phi=True))
        gen = RngStream(8, 0).generator()
        coeffs = {sample_block(s, gen).a_hat_k for _ in range(8)}
        assert len(coeffs) == 8
        static = build_scenario(small_cfg())
        gen = RngStream(8, 0).generator()
        assert {sample_block(static, gen).a_hat_k
                for _ in range(4)} == {static.a_hat_I}


class TestRptObservation:
    def test_attack_off_zero_noise_returns_fading(self):
        s = build_scenario(small_cfg(noise_dbm=-math.inf))
        assert s.sigma0_sq == 1.0
        ch = sample_block(s, RngStream(0, 0))
        assert np.all(ch.z == 0)
        y = rpt_observation(s, ch, attack_active=False)
        assert np.array_equal(y, ch.h_b)

    def test_null_variance_matches_sigma0(self):
        s = build_scenario(small_cfg())
        gen = RngStream(4, 0).generator()
        ys = np.stack([rpt_observation(s, sample_block(s, gen), False)
                       for _ in range(3000)])
        var = np.mean(np.abs(ys) ** 2)
        n = ys.size
        assert var == pytest.approx(s.sigma0_sq, abs=4.0 / math.sqrt(n))

    def test_attack_variance_scales_by_mu(self):
        s = build_scenario(small_cfg())
        gen = RngStream(5, 0).generator()
        ys = np.stack([rpt_observation(s, sample_block(s, gen), True)
                       for _ in range(3000)])
        var = np.mean(np.abs(ys) ** 2)
        target = s.sigma0_sq * (1.0 + s.mu)
        n = ys.size
        assert var == pytest.approx(target, abs=4.0 * target / math.sqrt(n))

    def test_null_norms_follow_gamma_law(self):
        s = build_scenario(small_cfg())
        gen = RngStream(6, 0).generator()
        norms = np.array([
            np.linalg.norm(rpt_observation(s, sample_block(s, gen), False)) ** 2
            for _ in range(10_000)]) / s.sigma0_sq
        stat = stats.kstest(norms, "gamma", args=(s.cfg.M,)).statistic
        assert stat < 1.628 / math.sqrt(10_000)  # 1% critical value
