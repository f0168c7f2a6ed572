"""System configuration and the seeded random-source contract.

All other modules consume a validated ``SystemConfig``. Parameters are kept
in channel-use units (powers linear, CFOs in radians per channel use); any
conversion from Hz/PPM happens in the experiments layer.
"""
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np


class SimulationError(Exception):
    """Base error carrying a machine-readable code.

    ``category`` separates configuration problems (caller can fix the
    input) from runtime simulation failures; clients map it to exit codes.
    """

    code = "simulation_error"
    category = "simulation"

    def __init__(self, message, code=None):
        super().__init__(message)
        if code is not None:
            self.code = code

    def to_dict(self):
        return {"code": self.code, "message": str(self),
                "category": self.category}


class ConfigError(SimulationError):
    code = "config_error"
    category = "config"


# JSON field name -> SystemConfig attribute. The file schema is closed:
# anything not listed here is rejected.
_JSON_FIELDS = {
    "m": "M",
    "k": "K",
    "n_pilot_cfo": "N",
    "n_uplink": "N_u",
    "n_coherence": "N_c",
    "p_u": "p_u",
    "sigma2": "sigma2",
    "beta": "beta",
    "omega_max": "omega_max",
    "c0": "c0",
    "seed": "seed",
}
_OPTIONAL_JSON_FIELDS = {"c0", "seed"}


@dataclass(frozen=True)
class SystemConfig:
    """Scalar parameters of one uplink configuration.

    Attributes
    ----------
    M : int
        BS antenna count.
    K : int
        Single-antenna user count.
    N : int
        CFO-pilot slot length in channel uses.
    N_u : int
        Uplink data slot length in channel uses (first K uses carry pilots).
    N_c : int
        Coherence interval in channel uses.
    p_u : float
        Per-user transmit power (linear).
    sigma2 : float
        Receiver noise variance (linear).
    beta : ndarray
        Length-K path-loss factors beta_k > 0.
    omega_max : float
        CFO magnitude bound in radians per channel use.
    c0 : float
        Power-scaling constant used when gamma = c0/sqrt(M).
    """

    M: int
    K: int
    N: int
    N_u: int
    N_c: int
    p_u: float = 1.0
    sigma2: float = 1.0
    beta: np.ndarray = field(default=None)
    omega_max: float = math.pi / 50
    c0: float = 1.0

    def __post_init__(self):
        # beta defaults to the unit profile; always stored as a K-vector
        b = self.beta
        if b is None:
            b = np.ones(self.K)
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if b.size == 1:
            b = np.full(self.K, float(b[0]))
        object.__setattr__(self, "beta", b)

    @property
    def gamma(self):
        """SNR gamma = p_u / sigma2 (linear)."""
        return self.p_u / self.sigma2

    def replace(self, **kwargs):
        """Return a validated copy with the given fields overridden."""
        return validate(replace(self, **kwargs))


def validate(config):
    """Check parameter relationships; return the config unchanged if valid.

    Raises
    ------
    ConfigError
        With a distinct ``code`` per violated rule.
    """
    c = config
    if not (isinstance(c.M, (int, np.integer)) and isinstance(c.K, (int, np.integer))):
        raise ConfigError("M and K must be integers", code="bad_type")
    if c.K < 1:
        raise ConfigError(f"K must be >= 1, got {c.K}", code="bad_k")
    if c.M <= c.K:
        raise ConfigError(
            f"M must exceed K for the ZF inverse to exist (M={c.M}, K={c.K})",
            code="m_le_k")
    if c.K > c.N:
        raise ConfigError(
            f"CFO pilot slot shorter than user count (N={c.N}, K={c.K})",
            code="k_gt_n")
    if not (c.N <= c.N_u <= c.N_c):
        raise ConfigError(
            f"slot lengths must satisfy N <= N_u <= N_c, got "
            f"N={c.N}, N_u={c.N_u}, N_c={c.N_c}", code="slot_order")
    if c.p_u <= 0 or c.sigma2 <= 0:
        raise ConfigError(
            f"powers must be positive (p_u={c.p_u}, sigma2={c.sigma2})",
            code="nonpositive_power")
    if c.beta.shape != (c.K,):
        raise ConfigError(
            f"beta must have length K={c.K}, got shape {c.beta.shape}",
            code="bad_beta")
    if np.any(c.beta <= 0):
        raise ConfigError("every beta_k must be positive", code="bad_beta")
    if c.omega_max < 0:
        raise ConfigError("omega_max must be nonnegative", code="bad_omega")
    if c.omega_max * c.K >= math.pi:
        # outside this bound the correlation-phase estimate is ambiguous
        raise ConfigError(
            f"omega_max*K must be < pi for identifiability "
            f"(omega_max*K = {c.omega_max * c.K:.4f})", code="omega_identifiability")
    if c.c0 <= 0:
        raise ConfigError("c0 must be positive", code="bad_c0")
    return c


def snr(config):
    """Return gamma = p_u / sigma2 (linear)."""
    return config.p_u / config.sigma2


@dataclass(frozen=True)
class RandomSource:
    """Seed plus substream id; the reproducibility contract of all trials.

    ``generator()`` derives an independent PCG64 stream per (seed, stream_id),
    so trial i of a Monte Carlo run always sees the same draws no matter how
    trials are partitioned across workers.
    """

    seed: int
    stream_id: int = 0

    def generator(self):
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.default_rng(ss)

    def substream(self, offset):
        """Source for trial number ``offset`` under this seed."""
        return RandomSource(self.seed, self.stream_id + offset)


def load_config(path):
    """Load a SystemConfig plus seed from a JSON file with a closed schema.

    The file must contain exactly the fields
    ``m, k, n_pilot_cfo, n_uplink, n_coherence, p_u, sigma2, beta,
    omega_max`` and optionally ``c0`` and ``seed``. Unknown fields are
    rejected.

    Returns
    -------
    (SystemConfig, int)
        The validated config and the seed (0 if absent).
    """
    with open(path) as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON in {path}: {e}", code="bad_json")
    return config_from_dict(raw)


def config_from_dict(raw):
    """Build (SystemConfig, seed) from a dict using the JSON field names."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object", code="bad_json")
    unknown = set(raw) - set(_JSON_FIELDS)
    if unknown:
        raise ConfigError(
            f"unknown config fields: {sorted(unknown)}", code="unknown_field")
    missing = set(_JSON_FIELDS) - _OPTIONAL_JSON_FIELDS - set(raw)
    if missing:
        raise ConfigError(
            f"missing config fields: {sorted(missing)}", code="missing_field")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed must be an integer", code="bad_type")
    kwargs = {}
    for name, attr in _JSON_FIELDS.items():
        if name == "seed" or name not in raw:
            continue
        kwargs[attr] = raw[name]
    for name in ("m", "k", "n_pilot_cfo", "n_uplink", "n_coherence"):
        v = raw[name]
        if not isinstance(v, int) or isinstance(v, bool):
            raise ConfigError(f"field '{name}' must be an integer", code="bad_type")
    if not isinstance(raw["beta"], (list, tuple)):
        raise ConfigError("field 'beta' must be an array", code="bad_type")
    config = validate(SystemConfig(**kwargs))
    return config, seed
