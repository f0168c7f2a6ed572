"""Experiment harness: required-SNR searches, sweeps, and result files.

Experiments are named sweeps over the antenna grid producing CSV rows plus a
JSON summary. All randomness flows through per-trial substreams of a single
seed, and CSV content is a pure function of (spec, config, seed, workers), so
repeated runs produce byte-identical files.
"""
import csv
import functools
import hashlib
import io
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .config import RandomSource, SimulationError
from .channel import draw_channel, uplink_rx
from .cfo import build_schedule, transmit_matrix, estimate_cfo, cfo_mse_closed_form
from .detection import measure_components_joint, run_chunked
from .rates import (user_rate, montecarlo_rate_report, zf_gram_inverse_mean,
                    gram_moments, wishart_inverse_trace_mean,
                    sample_gram_statistics, sample_wishart_inverse_trace)

EXPERIMENT_IDS = ("array_gain", "snr_gap", "mse_validation", "lemma_oracles")
CFO_MODES = ("estimated", "ideal-zero", "genie")
SNR_GAP_TARGETS = (1.0, 2.0, 2.5)   # bits per channel use
BRACKET_DB = (-30.0, 40.0)
MAX_BISECT_ITERS = 60
MC_GRID_OFFSETS_DB = (-0.25, 0.0, 0.25)


class BracketError(SimulationError):
    code = "bracket_failure"


@dataclass(frozen=True)
class SweepSpec:
    """Parameters of one experiment run."""

    experiment_id: str
    m_grid: tuple = None          # None: derived from the config's M
    target_rate: float = 2.0
    user_index: int = 1           # 1-based user whose rate is targeted
    receivers: tuple = ("zf", "mrc")
    trials: int = 0               # Monte Carlo trials (0: analytical only)
    tol_db: float = 0.01
    cfo_mode: str = "estimated"


@dataclass
class ExperimentResult:
    experiment_id: str
    columns: list
    rows: list                    # list of dicts keyed by column name
    metadata: dict
    plot_columns: list = None     # extra plot-data table (array_gain)
    plot_rows: list = None

    def csv_text(self):
        return render_csv(self.columns, self.rows)

    def plot_csv_text(self):
        if self.plot_columns is None:
            return None
        return render_csv(self.plot_columns, self.plot_rows)

    def summary_json(self):
        return json.dumps(
            {"metadata": self.metadata, "columns": self.columns, "rows": self.rows},
            indent=2, sort_keys=True)


def omega_max_from_ppm(f_c_hz=2e9, ppm=1.0, bandwidth_hz=200e3):
    """CFO bound in radians per channel use from oscillator accuracy.

    omega_max = 2*pi*(f_c*ppm*1e-6)/bandwidth. The defaults (2 GHz carrier,
    1 PPM, 200 kHz bandwidth) give pi/50.
    """
    return 2.0 * math.pi * (f_c_hz * ppm * 1e-6) / bandwidth_hz


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def round_db(x):
    """Half-up rounding of a dB value to 2 decimals (reporting convention)."""
    return math.floor(float(x) * 100 + 0.5) / 100


def render_csv(columns, rows):
    """RFC-4180 CSV text (CRLF, minimal quoting) for a list of row dicts."""
    buf = io.StringIO()
    w = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def build_id():
    """Content hash of the installed package sources (12 hex chars)."""
    pkg_dir = os.path.dirname(os.path.abspath(__file__))
    h = hashlib.sha1()
    for name in sorted(os.listdir(pkg_dir)):
        if not name.endswith(".py"):
            continue
        h.update(name.encode())
        with open(os.path.join(pkg_dir, name), "rb") as f:
            h.update(f.read())
    return h.hexdigest()[:12]


def _sigma_omega2(config, cfo_mode, gamma_cfo=None):
    if cfo_mode == "estimated":
        return cfo_mse_closed_form(config, gamma=gamma_cfo)
    return np.zeros(config.K)


def analytical_rate(config, receiver, cfo_mode, user_k=1, gamma_cfo=None):
    """I_k for the given receiver/mode at the config's gamma."""
    report = user_rate(config, receiver, _sigma_omega2(config, cfo_mode, gamma_cfo))
    return float(report.I[user_k - 1])


def min_snr_for_rate(config, M, receiver, cfo_mode, target, tol_db=0.01,
                     user_k=1, gamma_cfo=None):
    """Minimum gamma (dB) at which user_k's analytical rate reaches target.

    Bisection over gamma in dB on the bracket [-30, 40]. The residual-CFO
    variance is re-evaluated at every step because estimation quality rides
    on the same gamma as the data slot (``gamma_cfo`` pins it instead when
    the CFO phase runs at its own fixed power).
    """
    if cfo_mode not in CFO_MODES:
        raise SimulationError(
            f"cfo_mode must be one of {CFO_MODES}, got '{cfo_mode}'",
            code="bad_cfo_mode")
    base = config.replace(M=int(M))

    def rate_at(db):
        cfg = base.replace(p_u=10.0 ** (db / 10.0) * base.sigma2)
        return analytical_rate(cfg, receiver, cfo_mode, user_k, gamma_cfo)

    lo, hi = BRACKET_DB
    r_lo, r_hi = rate_at(lo), rate_at(hi)
    if not (r_lo < target <= r_hi):
        reason = ("interference-limited ceiling below target" if target > r_hi
                  else "already above target at the bracket floor")
        raise BracketError(
            f"target {target} bpcu not bracketed by rates "
            f"[{r_lo:.4f}, {r_hi:.4f}] for {receiver}/{cfo_mode} at M={M}: "
            f"{reason}")
    for _ in range(MAX_BISECT_ITERS):
        if hi - lo <= tol_db:
            break
        mid = 0.5 * (lo + hi)
        if rate_at(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def snr_gap_table(config, targets, M=None, tol_db=0.01, user_k=1):
    """Extra SNR (dB) MRC needs over ZF per target rate and CFO mode."""
    M = config.M if M is None else int(M)
    rows = []
    for target in targets:
        for mode in ("ideal-zero", "estimated"):
            g_zf = min_snr_for_rate(config, M, "zf", mode, target,
                                    tol_db=tol_db, user_k=user_k)
            g_mrc = min_snr_for_rate(config, M, "mrc", mode, target,
                                     tol_db=tol_db, user_k=user_k)
            rows.append({
                "experiment": "snr_gap", "M": M, "target_rate": target,
                "cfo_mode": mode,
                "gamma_star_zf_db": round_db(g_zf),
                "gamma_star_mrc_db": round_db(g_mrc),
                "gap_db": round_db(g_mrc - g_zf),
            })
    columns = ["experiment", "M", "target_rate", "cfo_mode",
               "gamma_star_zf_db", "gamma_star_mrc_db", "gap_db"]
    return ExperimentResult(
        experiment_id="snr_gap", columns=columns, rows=rows,
        metadata={"M": M, "targets": list(targets), "user_index": user_k})


def _mc_rate(config, gamma_db, receivers, trials, seed, cfo_mode, user_k, workers):
    cfg = config.replace(p_u=10.0 ** (gamma_db / 10.0) * config.sigma2)
    powers = measure_components_joint(
        cfg, trials, RandomSource(seed), cfo_mode=cfo_mode,
        kinds=tuple(receivers), workers=workers)
    return {kind: float(montecarlo_rate_report(p).I[user_k - 1])
            for kind, p in powers.items()}


def _array_gain(spec, config, seed, workers):
    rows = []
    per_m = {}
    for M in spec.m_grid:
        gstar = {}
        for kind in spec.receivers:
            gstar[kind] = min_snr_for_rate(
                config, M, kind, spec.cfo_mode, spec.target_rate,
                tol_db=spec.tol_db, user_k=spec.user_index)
        mc = {}
        if spec.trials > 0:
            # measured rate on a gamma grid around each analytical point;
            # the required gamma is the linear interpolation of the crossing
            grid_rates = {kind: [] for kind in spec.receivers}
            grid_dbs = {kind: [] for kind in spec.receivers}
            for off in MC_GRID_OFFSETS_DB:
                cfg_m = config.replace(M=int(M))
                for kind in spec.receivers:
                    db = gstar[kind] + off
                    r = _mc_rate(cfg_m, db, (kind,), spec.trials, seed,
                                 spec.cfo_mode, spec.user_index, workers)[kind]
                    grid_rates[kind].append(r)
                    grid_dbs[kind].append(db)
            for kind in spec.receivers:
                rates_arr = np.array(grid_rates[kind])
                dbs_arr = np.array(grid_dbs[kind])
                mc[kind] = {
                    "rate_at_star": rates_arr[len(MC_GRID_OFFSETS_DB) // 2],
                    "gamma_db": float(np.interp(spec.target_rate, rates_arr, dbs_arr)),
                }
        for kind in spec.receivers:
            row = {
                "experiment": "array_gain", "M": int(M), "receiver": kind,
                "cfo_mode": spec.cfo_mode, "target_rate": spec.target_rate,
                "user_index": spec.user_index,
                "gamma_star_db": round_db(gstar[kind]),
                "mc_rate_at_gamma_star": None, "mc_gamma_star_db": None,
                "trials": spec.trials, "seed": seed,
            }
            if spec.trials > 0:
                row["mc_rate_at_gamma_star"] = mc[kind]["rate_at_star"]
                row["mc_gamma_star_db"] = round_db(mc[kind]["gamma_db"])
            rows.append(row)
        per_m[M] = (gstar, mc)
    columns = ["experiment", "M", "receiver", "cfo_mode", "target_rate",
               "user_index", "gamma_star_db", "mc_rate_at_gamma_star",
               "mc_gamma_star_db", "trials", "seed"]
    # companion plot table: antenna count against required SNR, per receiver
    plot_columns = ["M"]
    for kind in spec.receivers:
        plot_columns += [f"gamma_star_db_{kind}", f"mc_gamma_star_db_{kind}"]
    plot_rows = []
    for M in spec.m_grid:
        gstar, mc = per_m[M]
        prow = {"M": int(M)}
        for kind in spec.receivers:
            prow[f"gamma_star_db_{kind}"] = round_db(gstar[kind])
            prow[f"mc_gamma_star_db_{kind}"] = (
                round_db(mc[kind]["gamma_db"]) if mc else None)
        plot_rows.append(prow)
    return ExperimentResult(
        experiment_id="array_gain", columns=columns, rows=rows, metadata={},
        plot_columns=plot_columns, plot_rows=plot_rows)


def _mse_chunk(config, source, trials, start, count):
    schedule = build_schedule(config)
    X_cfo = transmit_matrix(schedule, config)
    sqerr = np.zeros(config.K)
    for i in range(count):
        rng = source.substream(start + i).generator()
        ch = draw_channel(config, rng)
        rx = uplink_rx(ch, X_cfo, 0, config, rng)
        est = estimate_cfo(rx, schedule, config, omega_true=ch.omega)
        sqerr += est.residual ** 2
    return sqerr


def measure_cfo_mse(config, trials, source, workers=1):
    """Empirical residual-CFO variance per user over full-chain pilot trials."""
    if isinstance(source, int):
        source = RandomSource(source)
    fn = functools.partial(_mse_chunk, config, source, trials)
    parts = run_chunked(fn, trials, workers)
    total = parts[0]
    for p in parts[1:]:
        total = total + p
    return total / trials


def _mse_validation(spec, config, seed, workers):
    rows = []
    trials = spec.trials if spec.trials > 0 else 1000
    for M in spec.m_grid:
        cfg = config.replace(M=int(M))
        emp = measure_cfo_mse(cfg, trials, RandomSource(seed), workers)
        closed = cfo_mse_closed_form(cfg)
        for k in range(cfg.K):
            rows.append({
                "experiment": "mse_validation", "M": int(M),
                "gamma_db": round_db(10 * math.log10(cfg.gamma)),
                "user": k + 1,
                "empirical_mse": float(emp[k]),
                "closed_form_mse": float(closed[k]),
                "ratio": float(emp[k] / closed[k]),
                "trials": trials, "seed": seed,
            })
    columns = ["experiment", "M", "gamma_db", "user", "empirical_mse",
               "closed_form_mse", "ratio", "trials", "seed"]
    return ExperimentResult(
        experiment_id="mse_validation", columns=columns, rows=rows, metadata={})


def _lemma_oracles(spec, config, seed, workers):
    draws = spec.trials if spec.trials > 0 else 10000
    K, M = config.K, config.M
    stats = sample_gram_statistics(config, draws, RandomSource(seed))
    tr_sampled = sample_wishart_inverse_trace(M, K, draws, RandomSource(seed, 1))
    rows = []

    def add(quantity, k, i, closed, sampled):
        rows.append({
            "experiment": "lemma_oracles", "M": M, "K": K,
            "quantity": quantity, "user_k": k, "user_i": i,
            "closed_form": float(closed), "sampled": float(sampled),
            "rel_err": float(abs(sampled - closed) / abs(closed)),
            "draws": draws, "seed": seed,
        })

    for k in range(1, K + 1):
        m1, m2_diag, _ = gram_moments(config, k)
        add("gram_diag_mean", k, None, m1, stats["m1"][k - 1])
        add("gram_diag_sq_mean", k, None, m2_diag, stats["m2_diag"][k - 1])
        add("gram_inverse_diag_mean", k, None,
            zf_gram_inverse_mean(config, k), stats["inv_diag"][k - 1])
    for k in range(1, K + 1):
        for i in range(1, K + 1):
            if i == k:
                continue
            _, _, m2_cross = gram_moments(config, k, i)
            add("gram_cross_sq_mean", k, i, m2_cross, stats["m2"][k - 1, i - 1])
    add("wishart_inverse_trace", None, None,
        wishart_inverse_trace_mean(M, K), tr_sampled)
    columns = ["experiment", "M", "K", "quantity", "user_k", "user_i",
               "closed_form", "sampled", "rel_err", "draws", "seed"]
    return ExperimentResult(
        experiment_id="lemma_oracles", columns=columns, rows=rows, metadata={})


def _validate_spec(spec, config):
    if spec.experiment_id not in EXPERIMENT_IDS:
        raise SimulationError(
            f"unknown experiment '{spec.experiment_id}'; "
            f"expected one of {EXPERIMENT_IDS}", code="unknown_experiment")
    if spec.cfo_mode not in CFO_MODES:
        raise SimulationError(
            f"cfo_mode must be one of {CFO_MODES}", code="bad_cfo_mode")
    if spec.target_rate <= 0:
        raise SimulationError("target_rate must be positive", code="bad_spec")
    if spec.tol_db <= 0:
        raise SimulationError("tol_db must be positive", code="bad_spec")
    if spec.trials < 0:
        raise SimulationError("trials must be nonnegative", code="bad_spec")
    receivers = tuple(spec.receivers)
    if not receivers or any(r not in ("zf", "mrc") for r in receivers):
        raise SimulationError(
            f"receivers must be a nonempty subset of ('zf', 'mrc'), "
            f"got {receivers}", code="bad_spec")
    m_grid = spec.m_grid
    if m_grid is None:
        if spec.experiment_id == "array_gain":
            m_grid = tuple(config.M * s for s in (1, 2, 4, 8))
        else:
            m_grid = (config.M,)
    m_grid = tuple(int(m) for m in m_grid)
    if any(b <= a for a, b in zip(m_grid, m_grid[1:])):
        raise SimulationError("m_grid must be strictly increasing", code="bad_spec")
    if not (1 <= spec.user_index <= config.K):
        raise SimulationError(
            f"user_index must be in 1..K={config.K}", code="bad_spec")
    return SweepSpec(
        experiment_id=spec.experiment_id, m_grid=m_grid,
        target_rate=spec.target_rate, user_index=spec.user_index,
        receivers=receivers, trials=spec.trials, tol_db=spec.tol_db,
        cfo_mode=spec.cfo_mode)


_RUNNERS = {
    "array_gain": _array_gain,
    "snr_gap": None,   # handled inline (fixed canonical targets)
    "mse_validation": _mse_validation,
    "lemma_oracles": _lemma_oracles,
}


def run_experiment(spec, config, seed=0, out_dir=None, workers=1):
    """Run one named experiment; optionally write CSV/JSON files.

    Files written to out_dir: <id>.csv, <id>_summary.json, and for
    array_gain additionally <id>_plotdata.csv.
    """
    spec = _validate_spec(spec, config)
    t0 = time.perf_counter()
    if spec.experiment_id == "snr_gap":
        result = snr_gap_table(
            config, SNR_GAP_TARGETS, M=spec.m_grid[0], tol_db=spec.tol_db,
            user_k=spec.user_index)
    else:
        result = _RUNNERS[spec.experiment_id](spec, config, seed, workers)
    result.metadata = {
        "experiment": spec.experiment_id,
        "seed": seed,
        "trials": spec.trials,
        "m_grid": list(spec.m_grid),
        "target_rate": spec.target_rate,
        "user_index": spec.user_index,
        "receivers": list(spec.receivers),
        "cfo_mode": spec.cfo_mode,
        "tol_db": spec.tol_db,
        "workers": workers,
        "build_id": build_id(),
        "wall_time_s": round(time.perf_counter() - t0, 3),
    }
    if out_dir is not None:
        write_result_files(result, out_dir)
    return result


def write_result_files(result, out_dir):
    """Write the result tables; returns the list of paths written."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    base = os.path.join(out_dir, result.experiment_id)
    with open(base + ".csv", "wb") as f:
        f.write(result.csv_text().encode("utf-8"))
    paths.append(base + ".csv")
    plot = result.plot_csv_text()
    if plot is not None:
        with open(base + "_plotdata.csv", "wb") as f:
            f.write(plot.encode("utf-8"))
        paths.append(base + "_plotdata.csv")
    with open(base + "_summary.json", "w") as f:
        f.write(result.summary_json())
    paths.append(base + "_summary.json")
    return paths
