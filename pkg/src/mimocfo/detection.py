"""Linear detection and Monte Carlo measurement of the output components.

The detector output for user k at channel use t splits exactly as

    xhat_k[t] = ES_k[t] + SIF_k[t] + MUI_k[t] + EN_k[t]

where ES is the deterministic-mean signal part, SIF the fluctuation of the
effective gain around that mean (channel estimate magnitude and residual-CFO
phase wander), MUI everything bleeding over from other users plus the
channel-estimation error of user k, and EN the combined receiver noise. The
engine here runs the whole chain per trial (CFO pilots, CFO estimation, data
pilots, MMSE estimate, detection) and accumulates the empirical second
moments of each component, per user and channel use, together with the
cross-moments whose theoretical value is zero.
"""
import functools
import math
from dataclasses import dataclass

import numpy as np

from .config import SimulationError, RandomSource
from .channel import crandn, draw_channel, uplink_rx, noiseless_rx, ChannelRealization
from .cfo import build_schedule, transmit_matrix, estimate_cfo, cfo_mse_closed_form, CfoEstimate
from .chanest import pilot_matrix, mmse_estimate, estimate_entry_variance

CFO_MODES = ("estimated", "ideal-zero", "genie")
COND_LIMIT = 1e12
CHUNK = 64  # fixed accumulation granularity so results do not depend on workers


class SingularGramError(SimulationError):
    code = "singular_gram"

    def __init__(self, cond):
        super().__init__(f"gram matrix condition number {cond:.3e} exceeds "
                         f"{COND_LIMIT:.0e}")
        self.cond = cond


@dataclass(frozen=True)
class Detector:
    """Linear detector columns a_k as an M x K matrix."""

    kind: str  # "zf" or "mrc"
    A: np.ndarray


def build_detector(kind, estimate):
    """Build a ZF or MRC detector from a channel estimate.

    ZF solves A = G_hat (G_hat^H G_hat)^{-1} through a Hermitian solve of the
    K x K gram matrix; a condition number above 1e12 raises SingularGramError
    so the caller can redraw.
    """
    G_hat = estimate.G_hat
    if kind == "mrc":
        return Detector(kind=kind, A=G_hat)
    if kind != "zf":
        raise SimulationError(f"unknown detector kind '{kind}'", code="bad_detector")
    gram = G_hat.conj().T @ G_hat
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularGramError(cond)
    # A^H = gram^{-1} G_hat^H, using the Hermitian structure of gram
    A_h = np.linalg.solve(gram, G_hat.conj().T)
    return Detector(kind=kind, A=A_h.conj().T)


def detect(detector, r_t, cfo, t):
    """Detect one received sample: xhat_k[t] = (a_k^H r[t]) e^{-j omega_hat_k t}."""
    return (detector.A.conj().T @ r_t) * np.exp(-1j * cfo.omega_hat * t)


def detect_block(detector, block, cfo):
    """Vectorized detect over an entire received block (K x T output)."""
    T = block.samples.shape[1]
    t = block.t0 + np.arange(T)
    comp = np.exp(-1j * np.outer(cfo.omega_hat, t))
    return (detector.A.conj().T @ block.samples) * comp


@dataclass
class ComponentPowers:
    """Empirical component powers per (user, data channel use).

    Arrays are K x T over t = K .. N_u-1. ``cross`` holds pooled complex
    cross-moments (mean, se_re, se_im) whose theoretical value is zero:
    keys es_w, sif_mui, sif_en, mui_en, mmse_orth.
    """

    kind: str
    cfo_mode: str
    config: object
    n_trials: int
    n_rejected: int
    t: np.ndarray
    es2: np.ndarray
    sif2: np.ndarray
    mui2: np.ndarray
    en2: np.ndarray
    sig2: np.ndarray            # E|S_k[t] x_k[t]|^2, should match es2 + sif2
    se_es2: np.ndarray
    se_sif2: np.ndarray
    se_mui2: np.ndarray
    se_en2: np.ndarray
    se_sig2: np.ndarray
    cross: dict
    sigma_omega2: np.ndarray    # analytical residual variance used in the ES mean

    @property
    def w2(self):
        return self.sif2 + self.mui2 + self.en2

    def sinr(self):
        return self.es2 / self.w2

    def user_rates(self):
        """Per-user information rate from the measured SINR profile."""
        return np.log2(1.0 + self.sinr()).sum(axis=1) / self.config.N_u


def _zero_acc(K, T):
    names = ("es", "sif", "mui", "en", "sig")
    acc = {n + "2": np.zeros((K, T)) for n in names}
    acc.update({n + "4": np.zeros((K, T)) for n in names})
    for c in ("es_w", "sif_mui", "sif_en", "mui_en", "mmse_orth"):
        acc[c] = np.zeros(2)        # sum of (re, im)
        acc[c + "_sq"] = np.zeros(2)  # sum of squares
    acc["n"] = 0
    acc["rejected"] = 0
    return acc


def _pool(acc, name, values):
    v = complex(np.mean(values))
    acc[name] += (v.real, v.imag)
    acc[name + "_sq"] += (v.real ** 2, v.imag ** 2)


def _run_chunk(kinds, config, cfo_mode, source, trials, start, count):
    """Accumulate component statistics for trials [start, start+count)."""
    K, M, N_u = config.K, config.M, config.N_u
    T = N_u - K
    t_data = np.arange(K, N_u)
    tau = t_data[None, :] - np.arange(K)[:, None]       # t - (k-1), K x T
    schedule = build_schedule(config)
    X_cfo = transmit_matrix(schedule, config)
    X_pilot = pilot_matrix(config)
    if cfo_mode == "estimated":
        s2w = cfo_mse_closed_form(config)
    else:
        s2w = np.zeros(K)
    decay = np.exp(-s2w[:, None] * tau.astype(float) ** 2 / 2.0)
    gain_mean = {
        "zf": np.ones(K),
        "mrc": M * estimate_entry_variance(config),
    }
    acc = {kind: _zero_acc(K, T) for kind in kinds}
    rejected = 0

    for i in range(count):
        attempt = 0
        while True:
            # unique substream per (trial, attempt); redraws cannot collide
            rng = source.substream(start + i + attempt * trials).generator()
            ch = draw_channel(config, rng)
            if cfo_mode == "ideal-zero":
                ch = ChannelRealization(G=ch.G, H=ch.H, omega=np.zeros(K))
            if cfo_mode == "estimated":
                rx_cfo = uplink_rx(ch, X_cfo, 0, config, rng)
                est = estimate_cfo(rx_cfo, schedule, config, omega_true=ch.omega)
            else:
                est = CfoEstimate(
                    omega_hat=ch.omega.copy(), rho=None,
                    residual=np.zeros(K), mse_closed_form=s2w)
            x = crandn(rng, K, T)
            rx_p = uplink_rx(ch, X_pilot, 0, config, rng)
            rx_d = uplink_rx(ch, x, K, config, rng, apply_data_power=True)
            ghat = mmse_estimate(rx_p, est, config)
            try:
                dets = {kind: build_detector(kind, ghat) for kind in kinds}
                break
            except SingularGramError:
                rejected += 1
                attempt += 1

        w_d = rx_d.samples - noiseless_rx(ch, x, K, config, apply_data_power=True)
        dw = est.omega_hat - ch.omega
        drift = np.exp(-1j * dw[:, None] * tau)          # e^{-j dw_k (t-(k-1))}
        comp = np.exp(-1j * np.outer(est.omega_hat, t_data))
        # channel-estimation error sample for the MMSE orthogonality check
        g_eff = ch.G * np.exp(-1j * dw * np.arange(K))[None, :]
        eps = ghat.G_hat - g_eff

        for kind in kinds:
            A = dets[kind].A
            a = acc[kind]
            xhat = (A.conj().T @ rx_d.samples) * comp
            en = (A.conj().T @ w_d) * comp
            d = np.einsum("mk,mk->k", A.conj(), ghat.G_hat)  # a_k^H ghat_k
            S = math.sqrt(config.p_u) * d[:, None] * drift
            m_S = math.sqrt(config.p_u) * gain_mean[kind][:, None] * decay
            es = m_S * x
            sif = (S - m_S) * x
            mui = xhat - S * x - en
            w = xhat - es
            for name, val in (("es", es), ("sif", sif), ("mui", mui),
                              ("en", en), ("sig", S * x)):
                p = np.abs(val) ** 2
                a[name + "2"] += p
                a[name + "4"] += p ** 2
            _pool(a, "es_w", np.conj(es) * w)
            _pool(a, "sif_mui", np.conj(sif) * mui)
            _pool(a, "sif_en", np.conj(sif) * en)
            _pool(a, "mui_en", np.conj(mui) * en)
            _pool(a, "mmse_orth", ghat.G_hat * np.conj(eps))
            a["n"] += 1
    for kind in kinds:
        acc[kind]["rejected"] = rejected
    return acc


def _merge(accs):
    out = accs[0]
    for a in accs[1:]:
        for key, val in a.items():
            out[key] = out[key] + val
    return out


def _finalize(kind, acc, config, cfo_mode, s2w):
    n = acc["n"]
    T = config.N_u - config.K
    res = {}
    for name in ("es", "sif", "mui", "en", "sig"):
        mean = acc[name + "2"] / n
        var = np.maximum(acc[name + "4"] / n - mean ** 2, 0.0)
        res[name + "2"] = mean
        res["se_" + name + "2"] = np.sqrt(var / n)
    cross = {}
    for c in ("es_w", "sif_mui", "sif_en", "mui_en", "mmse_orth"):
        m = acc[c] / n
        var = np.maximum(acc[c + "_sq"] / n - m ** 2, 0.0)
        se = np.sqrt(var / n)
        cross[c] = {"mean": complex(m[0], m[1]),
                    "se_re": float(se[0]), "se_im": float(se[1])}
    return ComponentPowers(
        kind=kind, cfo_mode=cfo_mode, config=config, n_trials=n,
        n_rejected=int(acc["rejected"]), t=np.arange(config.K, config.N_u),
        es2=res["es2"], sif2=res["sif2"], mui2=res["mui2"], en2=res["en2"],
        sig2=res["sig2"], se_es2=res["se_es2"], se_sif2=res["se_sif2"],
        se_mui2=res["se_mui2"], se_en2=res["se_en2"], se_sig2=res["se_sig2"],
        cross=cross, sigma_omega2=s2w)


def chunk_ranges(trials):
    """Fixed-size chunk decomposition shared by all parallel loops."""
    return [(s, min(CHUNK, trials - s)) for s in range(0, trials, CHUNK)]


def run_chunked(fn, trials, workers=1):
    """Map fn(start, count) over fixed chunks, merging in chunk order.

    The fixed chunk size makes the floating-point accumulation identical
    for any worker count.
    """
    chunks = chunk_ranges(trials)
    if workers <= 1 or len(chunks) <= 1:
        return [fn(s, c) for s, c in chunks]
    import multiprocessing as mp
    with mp.Pool(workers) as pool:
        return pool.starmap(fn, chunks)


def measure_components_joint(config, trials, source, cfo_mode="estimated",
                             kinds=("zf", "mrc"), workers=1):
    """Measure ZF and MRC component powers on the same trials.

    Returns a dict kind -> ComponentPowers. Sharing trials halves the cost
    when both receivers are wanted and keeps their comparison paired.
    """
    if trials < 1:
        raise SimulationError("trials must be >= 1", code="bad_trials")
    if cfo_mode not in CFO_MODES:
        raise SimulationError(
            f"cfo_mode must be one of {CFO_MODES}, got '{cfo_mode}'",
            code="bad_cfo_mode")
    if isinstance(source, int):
        source = RandomSource(source)
    kinds = tuple(kinds)
    fn = functools.partial(_run_chunk, kinds, config, cfo_mode, source, trials)
    accs = run_chunked(fn, trials, workers)
    s2w = cfo_mse_closed_form(config) if cfo_mode == "estimated" else np.zeros(config.K)
    out = {}
    for kind in kinds:
        merged = _merge([a[kind] for a in accs])
        out[kind] = _finalize(kind, merged, config, cfo_mode, s2w)
    return out


def measure_components(kind, config, trials, source, cfo_mode="estimated",
                       workers=1):
    """Single-receiver variant of measure_components_joint."""
    return measure_components_joint(
        config, trials, source, cfo_mode=cfo_mode, kinds=(kind,),
        workers=workers)[kind]
