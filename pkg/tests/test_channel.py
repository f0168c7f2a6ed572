import numpy as np
import pytest

from mimocfo import (SystemConfig, RandomSource, SimulationError,
                     ChannelRealization, crandn, draw_channel, uplink_rx,
                     noiseless_rx)


def test_crandn_moments():
    rng = RandomSource(0).generator()
    z = crandn(rng, 200000)
    assert abs(np.mean(np.abs(z) ** 2) - 1.0) < 0.02
    assert abs(np.var(z.real) - 0.5) < 0.01
    assert abs(np.var(z.imag) - 0.5) < 0.01
    assert abs(np.mean(z)) < 0.01


def test_draw_channel_shapes_and_bounds(base_config):
    rng = RandomSource(1).generator()
    ch = draw_channel(base_config, rng)
    assert ch.G.shape == (80, 10) and ch.H.shape == (80, 10)
    assert ch.omega.shape == (10,)
    assert np.all(np.abs(ch.omega) <= base_config.omega_max)


def test_draw_channel_applies_beta():
    beta = np.array([0.25, 1.0, 4.0])
    cfg = SystemConfig(M=8, K=3, N=12, N_u=12, N_c=12, beta=beta)
    ch = draw_channel(cfg, RandomSource(2).generator())
    np.testing.assert_allclose(ch.G, ch.H * np.sqrt(beta), rtol=1e-12)


def test_noiseless_rx_phase_ramp():
    cfg = SystemConfig(M=4, K=1, N=8, N_u=8, N_c=8)
    G = np.arange(1, 5).reshape(4, 1).astype(complex)
    ch = ChannelRealization(G=G, H=G, omega=np.array([0.1]))
    x = np.ones((1, 5))
    t0 = 3
    got = noiseless_rx(ch, x, t0, cfg)
    t = t0 + np.arange(5)
    np.testing.assert_allclose(got, G @ np.exp(1j * 0.1 * t)[None, :], rtol=1e-12)


def test_data_power_scaling():
    cfg = SystemConfig(M=4, K=2, N=8, N_u=8, N_c=8, p_u=4.0)
    ch = draw_channel(cfg, RandomSource(3).generator())
    x = crandn(RandomSource(4).generator(), 2, 6)
    plain = noiseless_rx(ch, x, 0, cfg)
    scaled = noiseless_rx(ch, x, 0, cfg, apply_data_power=True)
    np.testing.assert_allclose(scaled, 2.0 * plain, rtol=1e-12)


def test_uplink_rx_noise_statistics():
    cfg = SystemConfig(M=64, K=4, N=256, N_u=256, N_c=256, sigma2=2.0)
    rng = RandomSource(5).generator()
    ch = draw_channel(cfg, rng)
    x = crandn(rng, 4, 256)
    rx = uplink_rx(ch, x, 0, cfg, rng)
    w = rx.samples - noiseless_rx(ch, x, 0, cfg)
    assert rx.t0 == 0
    assert abs(np.mean(np.abs(w) ** 2) / cfg.sigma2 - 1.0) < 0.05


def test_uplink_rx_rejects_bad_shape(base_config):
    rng = RandomSource(6).generator()
    ch = draw_channel(base_config, rng)
    with pytest.raises(SimulationError) as ei:
        uplink_rx(ch, np.ones((3, 7)), 0, base_config, rng)
    assert ei.value.code == "dimension_mismatch"
