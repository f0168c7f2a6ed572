"""Command-line entry point.

Runs an experiment from a JSON config and writes CSV/JSON results. By
default everything runs in-process; with --server the same request is sent
to a running service and the returned tables are written to identical files.

Exit codes: 0 ok, 2 config error, 3 bracket failure, 4 other simulation
error, 5 transport error.
"""
import argparse
import json
import sys

from .config import load_config, ConfigError, SimulationError
from .experiments import (SweepSpec, ExperimentResult, run_experiment,
                          write_result_files, EXPERIMENT_IDS, CFO_MODES)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BRACKET = 3
EXIT_SIMULATION = 4
EXIT_TRANSPORT = 5


def build_parser():
    p = argparse.ArgumentParser(
        prog="simulate",
        description="Multiuser massive MIMO uplink with residual CFO: "
                    "analytical rate sweeps and Monte Carlo experiments.")
    p.add_argument("--config", required=True, metavar="FILE",
                   help="JSON system config")
    p.add_argument("--experiment", required=True, choices=EXPERIMENT_IDS)
    p.add_argument("--out", required=True, metavar="DIR",
                   help="directory for result files")
    p.add_argument("--trials", type=int, default=0,
                   help="Monte Carlo trials (0: analytical only)")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    p.add_argument("--receivers", default="zf,mrc",
                   help="comma-separated subset of zf,mrc")
    p.add_argument("--cfo-mode", default="estimated", choices=CFO_MODES)
    p.add_argument("--m-grid", default=None, metavar="M1,M2,...",
                   help="antenna counts (default depends on the experiment)")
    p.add_argument("--target-rate", type=float, default=2.0,
                   help="per-user rate target in bits per channel use")
    p.add_argument("--user-index", type=int, default=1)
    p.add_argument("--tol-db", type=float, default=0.01)
    p.add_argument("--workers", type=int, default=1,
                   help="worker processes for Monte Carlo trials")
    p.add_argument("--server", default=None, metavar="URL",
                   help="run on a remote service instead of in-process")
    return p


def _fail(code, message, exit_code):
    sys.stderr.write(json.dumps({"error": {"code": code, "message": message}}))
    sys.stderr.write("\n")
    return exit_code


def _parse_lists(args):
    receivers = tuple(r.strip() for r in args.receivers.split(",") if r.strip())
    m_grid = None
    if args.m_grid is not None:
        try:
            m_grid = tuple(int(x) for x in args.m_grid.split(",") if x.strip())
        except ValueError:
            raise ConfigError(f"bad --m-grid value '{args.m_grid}'",
                              code="bad_type")
    return receivers, m_grid


def _run_local(args):
    config, seed = load_config(args.config)
    if args.seed is not None:
        seed = args.seed
    receivers, m_grid = _parse_lists(args)
    spec = SweepSpec(
        experiment_id=args.experiment, m_grid=m_grid,
        target_rate=args.target_rate, user_index=args.user_index,
        receivers=receivers, trials=args.trials, tol_db=args.tol_db,
        cfo_mode=args.cfo_mode)
    result = run_experiment(spec, config, seed=seed, out_dir=None,
                            workers=args.workers)
    return result


def _run_remote(args):
    import httpx

    with open(args.config) as f:
        raw = json.load(f)
    receivers, m_grid = _parse_lists(args)
    payload = {
        "config": raw,
        "experiment_id": args.experiment,
        "m_grid": list(m_grid) if m_grid is not None else None,
        "target_rate": args.target_rate,
        "user_index": args.user_index,
        "receivers": list(receivers),
        "trials": args.trials,
        "tol_db": args.tol_db,
        "cfo_mode": args.cfo_mode,
        "seed": args.seed,
        "workers": args.workers,
    }
    url = args.server.rstrip("/") + "/experiments/run"
    resp = httpx.post(url, json=payload, timeout=3600.0)
    if resp.status_code != 200:
        try:
            detail = resp.json()
        except ValueError:
            detail = {"error": {"code": "http_error", "message": resp.text}}
        err = detail.get("error", {"code": "http_error", "message": str(detail)})
        # a request the server deems malformed is a config problem here
        if err.get("category") == "config" or resp.status_code == 422:
            raise ConfigError(err.get("message", "bad request"),
                              code=err.get("code", "bad_request"))
        raise SimulationError(err.get("message", "server error"),
                              code=err.get("code", "http_error"))
    body = resp.json()
    return ExperimentResult(
        experiment_id=body["experiment_id"], columns=body["columns"],
        rows=body["rows"], metadata=body["metadata"],
        plot_columns=body.get("plot_columns"), plot_rows=body.get("plot_rows"))


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.server is None:
            result = _run_local(args)
        else:
            result = _run_remote(args)
        paths = write_result_files(result, args.out)
    except ConfigError as e:
        return _fail(e.code, str(e), EXIT_CONFIG)
    except SimulationError as e:
        if e.code == "bracket_failure":
            return _fail(e.code, str(e), EXIT_BRACKET)
        return _fail(e.code, str(e), EXIT_SIMULATION)
    except (OSError, json.JSONDecodeError) as e:
        return _fail("io_error", str(e), EXIT_CONFIG)
    except Exception as e:
        transport = type(e).__module__.startswith("httpx")
        if transport:
            return _fail("transport_error", str(e), EXIT_TRANSPORT)
        raise
    for path in paths:
        print(f"wrote {path}")
    print(f"{result.experiment_id}: {len(result.rows)} rows")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
