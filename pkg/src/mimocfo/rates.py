"""Closed-form SINR and information-rate expressions.

The residual CFO dw_k after compensation is modeled zero-mean Gaussian with
variance sigma2_w,k, so the mean effective gain decays like
E[e^{-j dw_k tau}] = e^{-sigma2_w,k tau^2 / 2} with tau = t - (k-1) the time
since user k's channel-estimation pilot. The per-user rate treats each data
channel use as its own SISO channel with worst-case-Gaussian effective
noise, summed over t = K .. N_u-1 and normalized by the slot length N_u.

All SINR values are linear; dB conversions happen at the reporting boundary.
1 - e^{-x} is evaluated via expm1 so tiny residual variances do not cancel.
"""
from dataclasses import dataclass

import numpy as np

from .config import RandomSource, SimulationError
from .channel import crandn, ChannelRealization, uplink_rx
from .chanest import pilot_matrix, mmse_estimate, estimate_entry_variance
from .cfo import CfoEstimate


@dataclass(frozen=True)
class RateReport:
    """Per-user SINR profile and aggregate rate.

    sinr and rate_terms are K x T over the data channel uses t = K..N_u-1;
    I_k = (1/N_u) * sum_t rate_terms[k, t].
    """

    t: np.ndarray
    sinr: np.ndarray
    rate_terms: np.ndarray
    I: np.ndarray
    mode: str
    sigma_omega2_used: np.ndarray


def _decoherence(sigma_omega2, tau):
    # x = sigma2_w * tau^2; returns (e^{-x}, 1 - e^{-x}) with expm1 hygiene
    x = np.asarray(sigma_omega2, dtype=float) * np.asarray(tau, dtype=float) ** 2
    return np.exp(-x), -np.expm1(-x)


def _zf_interference(config):
    """gamma-dependent interference-plus-noise coefficient, per user (ZF)."""
    g = config.gamma
    b = config.beta
    K, M = config.K, config.M
    bracket = np.sum(b / (K * g * b + 1.0)) + 1.0 / g
    return (1.0 / (M - K)) * (1.0 / b + 1.0 / (K * b ** 2 * g)) * bracket


def _mrc_interference(config):
    """Same coefficient for MRC; no (M-K) suppression of the other users."""
    g = config.gamma
    b = config.beta
    K, M = config.K, config.M
    bracket = np.sum(b) + 1.0 / g
    return (1.0 / M) * (1.0 / b + 1.0 / (K * b ** 2 * g)) * bracket


def sinr_zf(config, sigma_omega2_k, k, t):
    """ZF SINR for user k (1-based) at channel use t.

    e^{-s2 tau^2} / ( [1 - e^{-s2 tau^2}]
        + (1/(M-K)) (1/beta_k + 1/(K beta_k^2 gamma))
          [ sum_i beta_i/(K gamma beta_i + 1) + 1/gamma ] ),  tau = t-(k-1).
    """
    num, sif = _decoherence(sigma_omega2_k, t - (k - 1))
    return num / (sif + _zf_interference(config)[k - 1])


def sinr_mrc(config, sigma_omega2_k, k, t):
    """MRC SINR for user k (1-based) at channel use t.

    Same numerator; denominator [1 - e^{-s2 tau^2}]
        + (1/M) (1/beta_k + 1/(K beta_k^2 gamma)) [ sum_i beta_i + 1/gamma ].
    """
    num, sif = _decoherence(sigma_omega2_k, t - (k - 1))
    return num / (sif + _mrc_interference(config)[k - 1])


def sinr_profile(config, kind, sigma_omega2):
    """K x T SINR matrix over the data channel uses t = K .. N_u-1."""
    if kind not in ("zf", "mrc"):
        raise SimulationError(f"unknown receiver kind '{kind}'", code="bad_detector")
    t = np.arange(config.K, config.N_u)
    tau = t[None, :] - np.arange(config.K)[:, None]
    s2 = np.asarray(sigma_omega2, dtype=float)[:, None]
    num, sif = _decoherence(s2, tau)
    coef = _zf_interference(config) if kind == "zf" else _mrc_interference(config)
    return num / (sif + coef[:, None])


def user_rate(config, kind, sigma_omega2):
    """Analytical rate report for the given receiver and residual variances."""
    t = np.arange(config.K, config.N_u)
    sinr = sinr_profile(config, kind, sigma_omega2)
    terms = np.log2(1.0 + sinr)
    return RateReport(
        t=t, sinr=sinr, rate_terms=terms, I=terms.sum(axis=1) / config.N_u,
        mode=f"analytical-{kind}",
        sigma_omega2_used=np.broadcast_to(
            np.asarray(sigma_omega2, dtype=float), (config.K,)).copy())


def montecarlo_rate_report(powers):
    """Rate report from measured component powers (see detection module)."""
    sinr = powers.sinr()
    terms = np.log2(1.0 + sinr)
    return RateReport(
        t=powers.t, sinr=sinr, rate_terms=terms,
        I=terms.sum(axis=1) / powers.config.N_u,
        mode=f"montecarlo-{powers.kind}", sigma_omega2_used=powers.sigma_omega2)


def limiting_cfo_mse(config):
    """Residual-variance limit under gamma = c0/sqrt(M) as M grows.

    (1/c0^2) / (2 K^3 (N-K) beta_k^2), per user.
    """
    K, N = config.K, config.N
    return (1.0 / config.c0 ** 2) / (2 * K ** 3 * (N - K) * config.beta ** 2)


def asymptotic_sinr(config, zeta0, k, t):
    """Large-M SINR limit under gamma = c0/sqrt(M), common to ZF and MRC.

    e^{-zeta0 tau^2} / [ 1 - e^{-zeta0 tau^2} + 1/(K beta_k^2 c0^2) ].
    """
    num, sif = _decoherence(zeta0, t - (k - 1))
    floor = 1.0 / (config.K * config.beta[k - 1] ** 2 * config.c0 ** 2)
    return num / (sif + floor)


# ---------------------------------------------------------------------------
# Gram-matrix moment identities for the MMSE estimate, plus sampling oracles.
# With G_hat columns i.i.d. CN(0, c_k I_M), c_k = K p_u beta_k^2/(K p_u
# beta_k + sigma2):

def zf_gram_inverse_mean(config, k):
    """E[ {(G_hat^H G_hat)^{-1}}_kk ] = (1/beta_k + sigma2/(K p_u beta_k^2))/(M-K)."""
    if config.M <= config.K:
        raise SimulationError("gram inverse mean needs M > K", code="m_le_k")
    b = config.beta[k - 1]
    return (1.0 / b + config.sigma2 / (config.K * config.p_u * b ** 2)) \
        / (config.M - config.K)


def gram_moments(config, k, i=None):
    """First and second moments of the estimate's gram matrix entries.

    Returns (m1, m2_diag, m2_cross) for 1-based users k and i:
    m1 = E[(G^H G)_kk] = M c_k; m2_diag = E|(G^H G)_kk|^2 = M(M+1) c_k^2;
    m2_cross = E|(G^H G)_ki|^2 = M c_k c_i (None when i is omitted).
    """
    if k == i:
        raise SimulationError("cross moment needs k != i", code="bad_user_pair")
    c = estimate_entry_variance(config)
    M = config.M
    ck = c[k - 1]
    m2_cross = None if i is None else M * ck * c[i - 1]
    return M * ck, M * (M + 1) * ck ** 2, m2_cross


def wishart_inverse_trace_mean(M, K):
    """E[tr((U^H U)^{-1})] = K/(M-K) for U with i.i.d. CN(0,1) entries."""
    if M <= K:
        raise SimulationError("inverse trace mean needs M > K", code="m_le_k")
    return K / (M - K)


def sample_gram_statistics(config, draws, source):
    """Sampling oracle for the gram moments, through the real estimation path.

    Each draw synthesizes noisy channel-estimation pilots (zero CFO) and runs
    the MMSE estimator, then accumulates the gram matrix of G_hat and the
    diagonal of its inverse. Returns means: m1 (K,), m2_diag (K,), m2 (K x K
    second moments |gram_ki|^2), inv_diag (K,).
    """
    if isinstance(source, int):
        source = RandomSource(source)
    K = config.K
    m1 = np.zeros(K)
    m2 = np.zeros((K, K))
    inv_diag = np.zeros(K)
    X = pilot_matrix(config)
    no_cfo = CfoEstimate(
        omega_hat=np.zeros(K), rho=None, residual=np.zeros(K),
        mse_closed_form=np.zeros(K))
    for i in range(draws):
        rng = source.substream(i).generator()
        H = crandn(rng, config.M, K)
        ch = ChannelRealization(G=H * np.sqrt(config.beta), H=H, omega=np.zeros(K))
        rx = uplink_rx(ch, X, 0, config, rng)
        est = mmse_estimate(rx, no_cfo, config)
        gram = est.G_hat.conj().T @ est.G_hat
        m1 += np.real(np.diag(gram))
        m2 += np.abs(gram) ** 2
        inv_diag += np.real(np.diag(np.linalg.inv(gram)))
    return {
        "m1": m1 / draws,
        "m2_diag": np.diag(m2).copy() / draws,
        "m2": m2 / draws,
        "inv_diag": inv_diag / draws,
        "draws": draws,
    }


def sample_wishart_inverse_trace(M, K, draws, source):
    """Mean of tr((U^H U)^{-1}) over draws of U with i.i.d. CN(0,1) entries."""
    if isinstance(source, int):
        source = RandomSource(source)
    total = 0.0
    for i in range(draws):
        rng = source.substream(i).generator()
        U = crandn(rng, M, K)
        total += np.real(np.trace(np.linalg.inv(U.conj().T @ U)))
    return total / draws
