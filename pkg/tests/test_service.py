import math

import numpy as np
import pytest
from fastapi.testclient import TestClient

from mimocfo import SweepSpec, run_experiment, config_from_dict, user_rate
from mimocfo.cfo import cfo_mse_closed_form
from mimocfo.experiments import min_snr_for_rate
from mimocfo.service import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


CFG = {
    "m": 80, "k": 10, "n_pilot_cfo": 100, "n_uplink": 100,
    "n_coherence": 200, "p_u": 0.15, "sigma2": 1.0, "beta": [1.0] * 10,
    "omega_max": math.pi / 50,
}


def test_health(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"
    assert len(body["build_id"]) == 12


def test_validate_ok(client):
    r = client.post("/config/validate", json=CFG)
    assert r.status_code == 200
    body = r.json()
    assert body["valid"] and body["m"] == 80
    assert body["gamma_db"] == pytest.approx(10 * math.log10(0.15))


def test_validate_semantic_error(client):
    r = client.post("/config/validate", json=dict(CFG, m=5))
    assert r.status_code == 400
    assert r.json()["error"]["code"] == "m_le_k"


def test_validate_unknown_field(client):
    r = client.post("/config/validate", json=dict(CFG, bogus=1))
    assert r.status_code == 422
    assert r.json()["error"]["code"] == "bad_request"


def test_rate_matches_library(client):
    r = client.post("/analytics/rate",
                    json={"config": CFG, "receiver": "zf"})
    assert r.status_code == 200
    body = r.json()
    config, _ = config_from_dict(CFG)
    expect = user_rate(config, "zf", cfo_mse_closed_form(config))
    np.testing.assert_allclose(body["user_rates"], expect.I, rtol=1e-12)
    np.testing.assert_allclose(body["sigma_omega2"],
                               cfo_mse_closed_form(config), rtol=1e-12)


def test_rate_ideal_zero_mode(client):
    r = client.post("/analytics/rate",
                    json={"config": CFG, "receiver": "mrc",
                          "cfo_mode": "ideal-zero"})
    assert r.json()["sigma_omega2"] == [0.0] * 10


def test_required_snr_matches_library(client):
    r = client.post("/analytics/required-snr",
                    json={"config": CFG, "receiver": "mrc",
                          "target_rate": 2.0, "m": 320})
    assert r.status_code == 200
    config, _ = config_from_dict(CFG)
    expect = min_snr_for_rate(config, 320, "mrc", "estimated", 2.0)
    assert r.json()["gamma_star_db"] == pytest.approx(expect, abs=1e-9)
    assert r.json()["m"] == 320


def test_required_snr_bracket_failure(client):
    r = client.post("/analytics/required-snr",
                    json={"config": CFG, "receiver": "zf",
                          "target_rate": 50.0})
    assert r.status_code == 400
    assert r.json()["error"]["code"] == "bracket_failure"


def test_snr_gap_route(client):
    r = client.post("/analytics/snr-gap",
                    json={"config": CFG, "targets": [2.0], "m": 80})
    assert r.status_code == 200
    body = r.json()
    assert len(body["rows"]) == 2
    assert body["csv"].startswith("experiment,M,target_rate")


def test_experiment_route_matches_local(client):
    r = client.post("/experiments/run",
                    json={"config": CFG, "experiment_id": "snr_gap"})
    assert r.status_code == 200
    config, seed = config_from_dict(CFG)
    local = run_experiment(SweepSpec(experiment_id="snr_gap"), config, seed=seed)
    body = r.json()
    assert body["csv"] == local.csv_text()
    assert body["rows"] == local.rows


def test_experiment_route_rejects_bad_id(client):
    r = client.post("/experiments/run",
                    json={"config": CFG, "experiment_id": "fig9"})
    assert r.status_code == 422
    assert r.json()["error"]["code"] == "bad_request"
