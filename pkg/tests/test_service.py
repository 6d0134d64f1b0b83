import pytest
from fastapi.testclient import TestClient

from adsmc.service.app import app

SHORT = {"horizon": 6.0, "transient_cut": 1.0}


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200 and r.json()["status"] == "ok"


def test_run(client):
    r = client.post("/run", json={"config": SHORT, "seed": 3, "include_series": True})
    assert r.status_code == 200
    body = r.json()
    assert body["config"]["seed"] == 3
    assert set(body["report"]["mean_error"]) == {"T_exh", "AFR", "m_a", "speed"}
    assert body["series_csv"].startswith("# scenario: ")


def test_run_without_series(client):
    body = client.post("/run", json={"config": SHORT}).json()
    assert body["series_csv"] is None


def test_config_errors_listed(client):
    r = client.post("/run", json={"config": {"horizon": 1.0, "transient_cut": 2.0, "bits": 1}})
    assert r.status_code == 422
    assert len(r.json()["violations"]) == 2


def test_seed_must_be_u64(client):
    assert client.post("/run", json={"config": SHORT, "seed": -1}).status_code == 422
    assert client.post("/run", json={"config": SHORT, "seed": 2**64}).status_code == 422


def test_compare(client):
    r = client.post("/compare", json={"a": SHORT, "b": {**SHORT, "mode": "first-order-siso"}})
    assert r.status_code == 200
    rows = r.json()["rows"]
    assert [row["channel"] for row in rows] == ["T_exh", "AFR", "m_a", "speed"]


def test_compare_mismatch_is_conflict(client):
    r = client.post("/compare", json={"a": SHORT, "b": {**SHORT, "horizon": 7.0}})
    assert r.status_code == 409


def test_sweep(client):
    r = client.post("/sweep", json={"axis": "bits", "config": SHORT, "values": [16, None]})
    assert r.status_code == 200
    body = r.json()
    assert [row[0] for row in body["rows"]] == [16, None]
    assert client.post("/sweep", json={"axis": "gain", "config": SHORT}).status_code == 422


def test_selftest(client):
    body = client.post("/selftest").json()
    assert body["passed"] and len(body["results"]) >= 10
