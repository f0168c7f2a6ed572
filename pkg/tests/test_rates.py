import numpy as np
import pytest

from mimocfo import (SystemConfig, RandomSource, SimulationError,
                     sinr_zf, sinr_mrc, sinr_profile, user_rate,
                     limiting_cfo_mse, asymptotic_sinr, zf_gram_inverse_mean,
                     gram_moments, wishart_inverse_trace_mean,
                     sample_gram_statistics, sample_wishart_inverse_trace,
                     measure_components, montecarlo_rate_report)


def test_zf_sinr_no_residual(base_config):
    cfg = base_config.replace(p_u=0.15)
    # beta=1 collapses the ZF expression to (M-K) K g^2 / (2 K g + 1)
    assert sinr_zf(cfg, 0.0, 1, 10) == pytest.approx(3.9375, rel=1e-12)
    # no residual CFO, no time dependence
    assert sinr_zf(cfg, 0.0, 1, 99) == pytest.approx(3.9375, rel=1e-12)


def test_mrc_sinr_no_residual(base_config):
    cfg = base_config.replace(p_u=0.15)
    assert sinr_mrc(cfg, 0.0, 1, 10) == pytest.approx(2.88, rel=1e-12)


def test_sinr_decays_over_slot(base_config):
    s2 = 1e-4
    early = sinr_zf(base_config, s2, 1, 10)
    late = sinr_zf(base_config, s2, 1, 99)
    assert late < early


def test_profile_matches_scalars(base_config):
    s2 = np.full(10, 2e-5)
    for kind, fn in (("zf", sinr_zf), ("mrc", sinr_mrc)):
        prof = sinr_profile(base_config, kind, s2)
        t = np.arange(10, 100)
        for k in (1, 4, 10):
            manual = np.array([fn(base_config, s2[k - 1], k, tt) for tt in t])
            np.testing.assert_allclose(prof[k - 1], manual, rtol=1e-12)


def test_profile_rejects_unknown_kind(base_config):
    with pytest.raises(SimulationError) as ei:
        sinr_profile(base_config, "dfe", np.zeros(10))
    assert ei.value.code == "bad_detector"


def test_user_rate_closed_form(base_config):
    cfg = base_config.replace(p_u=0.15)
    report = user_rate(cfg, "zf", np.zeros(10))
    expect = (90.0 / 100.0) * np.log2(1.0 + 3.9375)
    np.testing.assert_allclose(report.I, np.full(10, expect), rtol=1e-12)
    assert report.mode == "analytical-zf"
    assert report.sinr.shape == (10, 90)


def test_limiting_mse_value(base_config):
    np.testing.assert_allclose(
        limiting_cfo_mse(base_config), np.full(10, 1.0 / 180000), rtol=1e-12)
    quarter = base_config.replace(c0=2.0)
    np.testing.assert_allclose(
        limiting_cfo_mse(quarter), np.full(10, 1.0 / 720000), rtol=1e-12)


def test_asymptotic_sinr_floor(base_config):
    # zeta0 = 0 leaves only the interference floor K beta^2 c0^2
    cfg = base_config.replace(c0=0.5)
    assert asymptotic_sinr(cfg, 0.0, 1, 50) == pytest.approx(2.5, rel=1e-12)
    # decoherence strictly reduces it
    assert asymptotic_sinr(cfg, 1e-5, 1, 50) < 2.5


def test_gram_closed_forms(base_config):
    np.testing.assert_allclose(zf_gram_inverse_mean(base_config, 1),
                               1.1 / 70, rtol=1e-12)
    m1, m2d, m2c = gram_moments(base_config, 1, 2)
    c = 10.0 / 11
    assert m1 == pytest.approx(80 * c, rel=1e-12)
    assert m2d == pytest.approx(80 * 81 * c ** 2, rel=1e-12)
    assert m2c == pytest.approx(80 * c * c, rel=1e-12)
    m1_only, m2d_only, none_cross = gram_moments(base_config, 1)
    assert (m1_only, m2d_only) == (m1, m2d) and none_cross is None


def test_gram_moment_errors(base_config):
    with pytest.raises(SimulationError) as ei:
        gram_moments(base_config, 3, 3)
    assert ei.value.code == "bad_user_pair"
    tall = SystemConfig(M=10, K=10, N=10, N_u=10, N_c=10)
    with pytest.raises(SimulationError) as ei:
        zf_gram_inverse_mean(tall, 1)
    assert ei.value.code == "m_le_k"
    with pytest.raises(SimulationError) as ei:
        wishart_inverse_trace_mean(4, 4)
    assert ei.value.code == "m_le_k"


def test_wishart_mean_value():
    assert wishart_inverse_trace_mean(40, 4) == pytest.approx(4.0 / 36, rel=1e-12)


def test_sampling_oracles_smoke(small_config):
    stats = sample_gram_statistics(small_config, 300, RandomSource(21))
    assert stats["draws"] == 300
    m1 = np.array([gram_moments(small_config, k)[0] for k in range(1, 5)])
    np.testing.assert_allclose(stats["m1"], m1, rtol=0.10)
    tr = sample_wishart_inverse_trace(40, 4, 300, RandomSource(22))
    assert abs(tr / wishart_inverse_trace_mean(40, 4) - 1.0) < 0.10


def test_montecarlo_report_consistency():
    cfg = SystemConfig(M=12, K=3, N=12, N_u=18, N_c=24, p_u=0.5)
    p = measure_components("zf", cfg, 64, RandomSource(23))
    rep = montecarlo_rate_report(p)
    np.testing.assert_allclose(rep.I, p.user_rates(), rtol=1e-12)
    assert rep.mode == "montecarlo-zf"
    np.testing.assert_array_equal(rep.t, p.t)
