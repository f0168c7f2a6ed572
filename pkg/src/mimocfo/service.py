"""HTTP service exposing the analytical calculators and experiment runner.

Run with: uvicorn mimocfo.service:app
The CLI talks to these routes when --server is given; every route is a thin
wrapper over the library so in-process and remote results are identical.
"""
import math

from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .config import SimulationError
from .cfo import cfo_mse_closed_form
from .rates import user_rate
from .experiments import (SweepSpec, run_experiment, min_snr_for_rate,
                          snr_gap_table, build_id, SNR_GAP_TARGETS)
from .schemas import (ConfigModel, ValidateResponse, RateRequest, RateResponse,
                      RequiredSnrRequest, RequiredSnrResponse, SnrGapRequest,
                      ExperimentRequest, TableResponse, ErrorModel)

import numpy as np


def _table_response(result):
    return TableResponse(
        experiment_id=result.experiment_id,
        columns=result.columns,
        rows=result.rows,
        metadata=result.metadata,
        csv=result.csv_text(),
        plot_columns=result.plot_columns,
        plot_rows=result.plot_rows,
        plot_csv=result.plot_csv_text(),
    )


def create_app():
    app = FastAPI(title="mimocfo", version="0.1.0")

    @app.exception_handler(SimulationError)
    async def simulation_error_handler(request, exc):
        return JSONResponse(
            status_code=400, content={"error": exc.to_dict()})

    @app.exception_handler(RequestValidationError)
    async def request_shape_handler(request, exc):
        first = exc.errors()[0] if exc.errors() else {}
        loc = ".".join(str(p) for p in first.get("loc", ()))
        msg = first.get("msg", "invalid request")
        return JSONResponse(
            status_code=422,
            content={"error": {"code": "bad_request",
                               "message": f"{loc}: {msg}" if loc else msg,
                               "category": "config"}})

    @app.get("/health")
    async def health():
        return {"status": "ok", "build_id": build_id()}

    @app.post("/config/validate", response_model=ValidateResponse,
              responses={400: {"model": ErrorModel}})
    async def validate_config(body: ConfigModel):
        config, seed = body.to_config()
        return ValidateResponse(
            valid=True, m=config.M, k=config.K,
            gamma_db=10 * math.log10(config.gamma), seed=seed)

    @app.post("/analytics/rate", response_model=RateResponse,
              responses={400: {"model": ErrorModel}})
    async def rate(body: RateRequest):
        config, _ = body.config.to_config()
        if body.cfo_mode == "estimated":
            sig2 = cfo_mse_closed_form(config)
        else:
            sig2 = np.zeros(config.K)
        report = user_rate(config, body.receiver, sig2)
        return RateResponse(
            receiver=body.receiver, cfo_mode=body.cfo_mode,
            gamma_db=10 * math.log10(config.gamma),
            user_rates=[float(x) for x in report.I],
            sigma_omega2=[float(x) for x in sig2])

    @app.post("/analytics/required-snr", response_model=RequiredSnrResponse,
              responses={400: {"model": ErrorModel}})
    async def required_snr(body: RequiredSnrRequest):
        config, _ = body.config.to_config()
        M = config.M if body.m is None else body.m
        g = min_snr_for_rate(
            config, M, body.receiver, body.cfo_mode, body.target_rate,
            tol_db=body.tol_db, user_k=body.user_index)
        return RequiredSnrResponse(
            receiver=body.receiver, cfo_mode=body.cfo_mode, m=M,
            target_rate=body.target_rate, gamma_star_db=g)

    @app.post("/analytics/snr-gap", response_model=TableResponse,
              responses={400: {"model": ErrorModel}})
    async def snr_gap(body: SnrGapRequest):
        config, _ = body.config.to_config()
        targets = tuple(body.targets) if body.targets else SNR_GAP_TARGETS
        result = snr_gap_table(
            config, targets, M=body.m, tol_db=body.tol_db,
            user_k=body.user_index)
        return _table_response(result)

    @app.post("/experiments/run", response_model=TableResponse,
              responses={400: {"model": ErrorModel}})
    async def experiments_run(body: ExperimentRequest):
        config, config_seed = body.config.to_config()
        seed = config_seed if body.seed is None else body.seed
        spec = SweepSpec(
            experiment_id=body.experiment_id,
            m_grid=tuple(body.m_grid) if body.m_grid else None,
            target_rate=body.target_rate,
            user_index=body.user_index,
            receivers=tuple(body.receivers),
            trials=body.trials,
            tol_db=body.tol_db,
            cfo_mode=body.cfo_mode)
        result = run_experiment(spec, config, seed=seed, workers=body.workers)
        return _table_response(result)

    return app


app = create_app()
