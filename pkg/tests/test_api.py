import pytest
from fastapi.testclient import TestClient

from app.main import app


@pytest.fixture
def client(output_root):
    return TestClient(app)


def test_root_and_health(client):
    assert client.get("/").json()["message"] == "Fault Projection Toolkit API"
    assert client.get("/health").json() == {"status": "healthy"}


def test_detect_sir_endpoint(client, output_root):
    scenario = {
        "name": "api",
        "grid": {"dt": 0.01, "steps": 1001},
        "fault": {"kind": "sensor_bias", "t_on": 2.0, "vector": [0.5]},
        "M": 200,
    }
    response = client.post("/api/v1/runs/detect-sir", json=scenario, params={"seed": 3})
    assert response.status_code == 200
    body = response.json()
    assert body["verdict"] == "faulty"
    assert body["exit_status"] == 2
    assert body["scenario"]["seed"] == 3
    assert (output_root / "api" / "zhat.csv").exists()


def test_simulate_endpoint(client, output_root):
    response = client.post("/api/v1/runs/simulate", json={"name": "api-sim", "grid": {"steps": 101}})
    assert response.status_code == 200
    assert response.json()["files"]["data"] == "data.csv"


def test_invalid_scenario_is_rejected(client):
    response = client.post("/api/v1/runs/detect-sir", json={"fault": {"kind": "sensor_bias", "t_on": 1.0}})
    assert response.status_code == 422


def test_invalid_override_is_rejected(client):
    response = client.post("/api/v1/runs/simulate", json={"name": "api-bad"}, params={"burn_in": 2.0})
    assert response.status_code == 422


def test_unknown_plant_is_rejected(client):
    response = client.post("/api/v1/runs/simulate", json={"plant": {"name": "pendulum"}})
    assert response.status_code == 422


def test_verify_endpoints(client):
    assert "all" in client.get("/api/v1/verify/").json()
    assert client.get("/api/v1/verify/everything").status_code == 404
    report = client.get("/api/v1/verify/lti_oracle").json()
    assert report["passed"] is True
