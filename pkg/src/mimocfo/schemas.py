"""Request/response models for the HTTP service.

The wire schema mirrors the JSON config file: same field names, unknown
fields rejected. Semantic validation stays in ``config.validate``; these
models only shape the payloads.
"""
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict

from .config import config_from_dict

Receiver = Literal["zf", "mrc"]
CfoMode = Literal["estimated", "ideal-zero", "genie"]
ExperimentId = Literal["array_gain", "snr_gap", "mse_validation", "lemma_oracles"]


class ConfigModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    m: int
    k: int
    n_pilot_cfo: int
    n_uplink: int
    n_coherence: int
    p_u: float
    sigma2: float
    beta: List[float]
    omega_max: float
    c0: float = 1.0
    seed: int = 0

    def to_config(self):
        """Validated (SystemConfig, seed); raises ConfigError on bad values."""
        return config_from_dict(self.model_dump())


class ValidateResponse(BaseModel):
    valid: bool
    m: int
    k: int
    gamma_db: float
    seed: int


class RateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: ConfigModel
    receiver: Receiver
    cfo_mode: CfoMode = "estimated"


class RateResponse(BaseModel):
    receiver: Receiver
    cfo_mode: CfoMode
    gamma_db: float
    user_rates: List[float]
    sigma_omega2: List[float]


class RequiredSnrRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: ConfigModel
    receiver: Receiver
    target_rate: float
    cfo_mode: CfoMode = "estimated"
    m: Optional[int] = None
    user_index: int = 1
    tol_db: float = 0.01


class RequiredSnrResponse(BaseModel):
    receiver: Receiver
    cfo_mode: CfoMode
    m: int
    target_rate: float
    gamma_star_db: float


class SnrGapRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: ConfigModel
    targets: Optional[List[float]] = None
    m: Optional[int] = None
    user_index: int = 1
    tol_db: float = 0.01


class TableResponse(BaseModel):
    experiment_id: str
    columns: List[str]
    rows: List[dict]
    metadata: dict
    csv: str
    plot_columns: Optional[List[str]] = None
    plot_rows: Optional[List[dict]] = None
    plot_csv: Optional[str] = None


class ExperimentRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: ConfigModel
    experiment_id: ExperimentId
    m_grid: Optional[List[int]] = None
    target_rate: float = 2.0
    user_index: int = 1
    receivers: List[Receiver] = ["zf", "mrc"]
    trials: int = 0
    tol_db: float = 0.01
    cfo_mode: CfoMode = "estimated"
    seed: Optional[int] = None
    workers: int = 1


class ErrorBody(BaseModel):
    code: str
    message: str
    category: str = "simulation"


class ErrorModel(BaseModel):
    error: ErrorBody
