"""Channel realizations and received-signal synthesis.

Model: frequency-flat i.i.d. Rayleigh fading g_mk = h_mk*sqrt(beta_k) with
h_mk ~ CN(0,1), per-user CFO omega_k constant over a frame, AWGN of variance
sigma2 per receive antenna and channel use. CN(0,v) means independent real
and imaginary parts of variance v/2 each, so E|h_mk|^2 = 1.
"""
from dataclasses import dataclass

import numpy as np

from .config import SimulationError


def crandn(rng, *shape):
    """Draw i.i.d. CN(0,1) samples of the given shape."""
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of the propagation state.

    G is the M x K gain matrix g_mk = h_mk*sqrt(beta_k); H holds the unit
    variance fading h_mk; omega is the length-K vector of true CFOs in
    radians per channel use.
    """

    G: np.ndarray
    H: np.ndarray
    omega: np.ndarray


@dataclass(frozen=True)
class ReceivedBlock:
    """M x T received samples starting at channel-use index t0."""

    samples: np.ndarray
    t0: int


def draw_channel(config, rng):
    """Draw fading and CFOs for one frame.

    Draw order (stable contract for reproducibility): H first as M*K CN(0,1)
    values, then omega as K uniforms on [-omega_max, omega_max].
    """
    H = crandn(rng, config.M, config.K)
    G = H * np.sqrt(config.beta)[None, :]
    omega = rng.uniform(-config.omega_max, config.omega_max, config.K)
    return ChannelRealization(G=G, H=H, omega=omega)


def uplink_rx(channel, x_tx, t0, config, rng, apply_data_power=False):
    """Synthesize the received block for a K x T transmit matrix.

    r_m[t] = sum_q g_mq e^{j omega_q t} x_q[t - t0] + w_m[t], with
    w_m[t] i.i.d. CN(0, sigma2). ``x_tx`` carries the transmit amplitudes
    as-is (pilot impulses already include their sqrt(K*p_u) amplitude);
    with ``apply_data_power=True`` the symbols are scaled by sqrt(p_u),
    the convention for unit-power data symbols.

    The noise is drawn in a single M x T block after the signal term, which
    fixes the per-call stream layout.
    """
    x_tx = np.asarray(x_tx)
    if x_tx.ndim != 2 or x_tx.shape[0] != config.K:
        raise SimulationError(
            f"transmit matrix must be K x T with K={config.K}, "
            f"got shape {x_tx.shape}", code="dimension_mismatch")
    T = x_tx.shape[1]
    t = t0 + np.arange(T)
    phases = np.exp(1j * channel.omega[:, None] * t[None, :])  # K x T
    amp = np.sqrt(config.p_u) if apply_data_power else 1.0
    signal = channel.G @ (amp * x_tx * phases)
    noise = crandn(rng, config.M, T) * np.sqrt(config.sigma2)
    return ReceivedBlock(samples=signal + noise, t0=t0)


def noiseless_rx(channel, x_tx, t0, config, apply_data_power=False):
    """Signal-only counterpart of uplink_rx (no rng, no noise draw).

    Used to split a received block into signal and noise without changing
    the synthesis path: samples - noiseless == the realized AWGN.
    """
    T = np.asarray(x_tx).shape[1]
    t = t0 + np.arange(T)
    phases = np.exp(1j * channel.omega[:, None] * t[None, :])
    amp = np.sqrt(config.p_u) if apply_data_power else 1.0
    return channel.G @ (amp * np.asarray(x_tx) * phases)
