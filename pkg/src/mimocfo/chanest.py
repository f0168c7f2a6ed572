"""MMSE estimation of the effective channel from sequential pilots.

The data slot opens with K channel uses in which user k alone sends an
impulse of amplitude sqrt(K*p_u) at t = k-1. After rotating each received
pilot by exp(-j*omega_hat_k*(k-1)) (CFO compensation at the BS), the MMSE
estimate of the effective gain g_mk*e^{-j*dw_k*(k-1)} is a per-user scalar
shrinkage of the compensated sample. Rotation by a fixed angle leaves the
circularly symmetric statistics of both channel and noise unchanged, so the
estimate's distribution does not depend on the realized CFO error.
"""
from dataclasses import dataclass

import numpy as np

from .config import SimulationError


@dataclass(frozen=True)
class ChannelEstimate:
    """MMSE estimate G_hat with its per-user statistics.

    scale_k = sqrt(K*p_u)*beta_k / (K*p_u*beta_k + sigma2) is the MMSE gain;
    error_cov_diag_k = beta_k*sigma2 / (K*p_u*beta_k + sigma2) is the
    per-entry variance of the estimation error epsilon_mk. The per-entry
    variance of g_hat_mk itself is beta_k minus that (see
    estimate_entry_variance).
    """

    G_hat: np.ndarray
    scale: np.ndarray
    error_cov_diag: np.ndarray


def pilot_matrix(config):
    """K x K transmit matrix of the channel-estimation pilots (impulses)."""
    return np.sqrt(config.K * config.p_u) * np.eye(config.K)


def estimate_entry_variance(config):
    """Per-entry variance c_k = K*p_u*beta_k^2/(K*p_u*beta_k + sigma2) of g_hat."""
    b = config.beta
    return config.K * config.p_u * b ** 2 / (config.K * config.p_u * b + config.sigma2)


def mmse_estimate(rx, cfo, config):
    """Compute G_hat from the first K received channel uses of the data slot.

    g_hat_mk = scale_k * r_m[k-1] * e^{-j*omega_hat_k*(k-1)}.
    """
    if rx.t0 != 0 or rx.samples.shape[1] < config.K:
        raise SimulationError(
            f"pilot block must start at t=0 and span at least K={config.K} "
            f"channel uses, got t0={rx.t0}, T={rx.samples.shape[1]}",
            code="dimension_mismatch")
    K = config.K
    y = rx.samples[:, :K]
    comp = np.exp(-1j * cfo.omega_hat * np.arange(K))        # per-user rotation
    scale = np.sqrt(K * config.p_u) * config.beta / (
        K * config.p_u * config.beta + config.sigma2)
    G_hat = scale[None, :] * y * comp[None, :]
    return ChannelEstimate(
        G_hat=G_hat, scale=scale, error_cov_diag=error_covariance(config))


def error_covariance(config):
    """Per-entry variance of the estimation error, per user (length K).

    E[eps_k eps_k^H] = beta_k*sigma2/(K*p_u*beta_k + sigma2) * I_M.
    """
    b = config.beta
    return b * config.sigma2 / (config.K * config.p_u * b + config.sigma2)
