"""CFO estimation from impulse pilots.

Each user sends one impulse per pilot block; blocks are K channel uses long,
so consecutive impulses of user k are spaced exactly K apart and the phase of
their correlation advances by omega_k*K. Averaging the correlation over all
block pairs and antennas and taking the principal argument recovers omega_k
up to the identifiability bound |omega_k*K| < pi.
"""
from dataclasses import dataclass

import numpy as np

from .config import SimulationError


class DegenerateBlocksError(SimulationError):
    code = "degenerate_blocks"


@dataclass(frozen=True)
class CfoPilotSchedule:
    """Impulse positions for the CFO pilot slot.

    B is ceil(N/K). When K does not divide N the last block is truncated:
    users whose impulse would fall beyond N-1 only get b_eff = B-1 blocks
    (b_eff is per user). tau[b, k] = b*K + k is the impulse position of user
    k in block b (0-based b and k), or -1 where truncated.
    """

    B: int
    tau: np.ndarray          # B x K int, -1 marks truncated slots
    b_eff: np.ndarray        # length K
    amplitude: float         # sqrt(K * p_u)


def build_schedule(config):
    """Lay out the impulse pilots over the N-channel-use CFO slot."""
    K, N = config.K, config.N
    B = -(-N // K)  # ceil
    b = np.arange(B)[:, None]
    k = np.arange(K)[None, :]
    tau = b * K + k
    tau = np.where(tau < N, tau, -1)
    b_eff = (tau >= 0).sum(axis=0)
    return CfoPilotSchedule(
        B=B, tau=tau, b_eff=b_eff, amplitude=np.sqrt(K * config.p_u))


def transmit_matrix(schedule, config):
    """K x N transmit matrix with the scheduled impulses, zeros elsewhere."""
    X = np.zeros((config.K, config.N))
    for k in range(config.K):
        pos = schedule.tau[:, k]
        X[k, pos[pos >= 0]] = schedule.amplitude
    return X


@dataclass(frozen=True)
class CfoEstimate:
    """Per-user CFO estimates and the statistics attached to them.

    residual is omega_hat - omega_true when the truth was supplied (Monte
    Carlo use), else None. mse_closed_form is the analytical residual
    variance evaluated at the config's gamma with G_k = 1.
    """

    omega_hat: np.ndarray
    rho: np.ndarray
    residual: np.ndarray
    mse_closed_form: np.ndarray


def estimate_cfo(rx, schedule, config, omega_true=None):
    """Estimate all K CFOs from the received CFO-pilot block.

    rho_k averages conj(r[tau(b,k)]) * r[tau(b+1,k)] over antennas and the
    b_eff,k - 1 consecutive block pairs, normalized by M*K*(b_eff,k - 1)*
    p_u*beta_k; omega_hat_k is its principal argument divided by K.
    """
    if np.any(schedule.b_eff < 2):
        bad = np.nonzero(schedule.b_eff < 2)[0]
        raise DegenerateBlocksError(
            f"users {bad.tolist()} have fewer than 2 pilot blocks "
            f"(N={config.N}, K={config.K}); correlation needs B_eff >= 2")
    r = rx.samples
    M, K = config.M, config.K
    rho = np.empty(K, dtype=complex)
    for k in range(K):
        pos = schedule.tau[:, k]
        pos = pos[pos >= 0]
        pairs = np.conj(r[:, pos[:-1]]) * r[:, pos[1:]]
        rho[k] = pairs.sum() / (M * K * (len(pos) - 1) * config.p_u * config.beta[k])
    omega_hat = np.angle(rho) / K
    residual = None if omega_true is None else omega_hat - omega_true
    return CfoEstimate(
        omega_hat=omega_hat, rho=rho, residual=residual,
        mse_closed_form=cfo_mse_closed_form(config))


def cfo_mse_closed_form(config, Gk=1.0, gamma=None):
    """Analytical residual-CFO variance per user (length-K vector).

    sigma2_w,k = [ (1/(gamma*beta_k)) * ( G_k/(B_eff,k - 1)
                  + 1/(2*K*gamma*beta_k) ) ] / [ M*(N-K)*K^2*G_k^2 ]

    ``Gk`` is the realized antenna-average gain (1.0, its mean, for the
    analytical curves). ``gamma`` overrides the config SNR when the CFO
    phase runs at a different power than the data phase.
    """
    g = config.gamma if gamma is None else gamma
    b_eff = build_schedule(config).b_eff
    if np.any(b_eff < 2):
        raise DegenerateBlocksError(
            "closed-form MSE undefined with fewer than 2 pilot blocks")
    K, M, N = config.K, config.M, config.N
    beta = config.beta
    Gk = np.broadcast_to(np.asarray(Gk, dtype=float), (K,))
    num = (1.0 / (g * beta)) * (Gk / (b_eff - 1) + 1.0 / (2 * K * g * beta))
    return num / (M * (N - K) * K ** 2 * Gk ** 2)


def gamma_threshold(config, Gk=1.0):
    """SNR above which the small-error expansion of the estimator holds.

    gamma0_k = [ (B-1)/(2B-3) ] / [ K*G_k*( sqrt(1 + 2M(B-1)^3/(2B-3)^2) - 1 ) ]
    evaluated with the per-user effective block count. The estimator is
    trustworthy for gamma >> gamma0; vectors returned per user.
    """
    b_eff = build_schedule(config).b_eff.astype(float)
    if np.any(b_eff < 2):
        raise DegenerateBlocksError(
            "threshold undefined with fewer than 2 pilot blocks")
    K, M = config.K, config.M
    Gk = np.broadcast_to(np.asarray(Gk, dtype=float), (K,))
    top = (b_eff - 1) / (2 * b_eff - 3)
    root = np.sqrt(1.0 + 2 * M * (b_eff - 1) ** 3 / (2 * b_eff - 3) ** 2)
    return top / (K * Gk * (root - 1.0))
