import json
import math

import numpy as np
import pytest

from mimocfo import (SystemConfig, RandomSource, ConfigError, validate, snr,
                     load_config, config_from_dict)


def test_defaults(base_config):
    c = base_config
    assert c.p_u == 1.0 and c.sigma2 == 1.0
    np.testing.assert_array_equal(c.beta, np.ones(10))
    assert c.gamma == 1.0
    assert snr(c) == 1.0
    assert c.omega_max == pytest.approx(math.pi / 50)


def test_beta_scalar_broadcast():
    c = SystemConfig(M=20, K=4, N=20, N_u=20, N_c=40, beta=0.5)
    np.testing.assert_array_equal(c.beta, np.full(4, 0.5))


def test_replace_revalidates(base_config):
    c2 = base_config.replace(M=320, p_u=0.25)
    assert c2.M == 320 and c2.gamma == 0.25
    assert base_config.M == 80
    with pytest.raises(ConfigError) as ei:
        base_config.replace(M=5)
    assert ei.value.code == "m_le_k"


@pytest.mark.parametrize("overrides,code", [
    (dict(K=0), "bad_k"),
    (dict(M=10), "m_le_k"),
    (dict(N=8), "k_gt_n"),
    (dict(N_u=99), "slot_order"),
    (dict(N_c=99), "slot_order"),
    (dict(p_u=0.0), "nonpositive_power"),
    (dict(sigma2=-1.0), "nonpositive_power"),
    (dict(beta=np.ones(3)), "bad_beta"),
    (dict(beta=-np.ones(10)), "bad_beta"),
    (dict(omega_max=-0.1), "bad_omega"),
    (dict(omega_max=math.pi / 10), "omega_identifiability"),
    (dict(c0=0.0), "bad_c0"),
])
def test_validate_codes(base_config, overrides, code):
    fields = dict(M=80, K=10, N=100, N_u=100, N_c=200)
    fields.update({k: v for k, v in overrides.items()
                   if k in ("M", "K", "N", "N_u", "N_c")})
    extra = {k: v for k, v in overrides.items()
             if k not in ("M", "K", "N", "N_u", "N_c")}
    with pytest.raises(ConfigError) as ei:
        validate(SystemConfig(**fields, **extra))
    assert ei.value.code == code


def test_random_source_reproducible():
    a = RandomSource(7).generator().standard_normal(5)
    b = RandomSource(7).generator().standard_normal(5)
    np.testing.assert_array_equal(a, b)
    c = RandomSource(8).generator().standard_normal(5)
    assert not np.array_equal(a, c)


def test_substreams_are_distinct_and_stable():
    src = RandomSource(3)
    x1 = src.substream(1).generator().standard_normal(4)
    x2 = src.substream(2).generator().standard_normal(4)
    assert not np.array_equal(x1, x2)
    # trial index fully determines the stream, independent of partitioning
    np.testing.assert_array_equal(
        x2, RandomSource(3, 2).generator().standard_normal(4))


VALID = {
    "m": 80, "k": 10, "n_pilot_cfo": 100, "n_uplink": 100,
    "n_coherence": 200, "p_u": 1.0, "sigma2": 1.0, "beta": [1.0] * 10,
    "omega_max": math.pi / 50,
}


def test_load_config_roundtrip(tmp_path):
    raw = dict(VALID, seed=42, c0=0.5)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(raw))
    config, seed = load_config(path)
    assert seed == 42
    assert config.M == 80 and config.K == 10 and config.c0 == 0.5
    np.testing.assert_array_equal(config.beta, np.ones(10))


def test_load_config_defaults(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(VALID))
    config, seed = load_config(path)
    assert seed == 0 and config.c0 == 1.0


def test_bad_json(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError) as ei:
        load_config(path)
    assert ei.value.code == "bad_json"


@pytest.mark.parametrize("mutate,code", [
    (lambda r: r.update(bogus=1), "unknown_field"),
    (lambda r: r.pop("m"), "missing_field"),
    (lambda r: r.update(m=80.0), "bad_type"),
    (lambda r: r.update(k=True), "bad_type"),
    (lambda r: r.update(seed=1.5), "bad_type"),
    (lambda r: r.update(beta=1.0), "bad_type"),
])
def test_config_from_dict_rejects(mutate, code):
    raw = dict(VALID)
    mutate(raw)
    with pytest.raises(ConfigError) as ei:
        config_from_dict(raw)
    assert ei.value.code == code


def test_config_from_dict_semantic_error():
    raw = dict(VALID, m=5)
    with pytest.raises(ConfigError) as ei:
        config_from_dict(raw)
    assert ei.value.code == "m_le_k"
