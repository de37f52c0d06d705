import math

import pytest
from fastapi.testclient import TestClient

from gaussglass import __version__
from gaussglass.main import app


@pytest.fixture
def client() -> TestClient:
    return TestClient(app)


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "healthy"
    assert body["version"] == __version__


def test_debug_config(client):
    body = client.get("/debug/config").json()
    assert "SEED" in body
    assert "RSB_LEVELS" in body


def test_annealed(client):
    body = client.get("/closed-form/annealed", params={"beta": 0.5, "lambda": 0.5}).json()
    assert body["value"] == pytest.approx(0.5 * math.log(2.0))
    assert body["lambda"] == 0.5
    assert body["regime"] == "annealed"


def test_annealed_outside_domain(client):
    response = client.get("/closed-form/annealed", params={"beta": 0.5, "lambda": 1.5})
    assert response.status_code == 422
    assert response.json()["detail"]["error"] == "domain_error"


def test_parameter_validation(client):
    assert client.get("/closed-form/rs").status_code == 422
    assert client.get("/closed-form/rs", params={"beta": -1.0}).status_code == 422


def test_rs(client):
    body = client.get("/closed-form/rs", params={"beta": 2.0}).json()
    assert body["q_bar"] == pytest.approx(0.25)
    assert body["regime"] == "condensed"
    assert body["pressure"] == pytest.approx(-0.034074, abs=1e-6)


def test_shell_matches_rs(client):
    shell = client.get("/closed-form/shell", params={"beta": 1.5, "lambda": -0.5}).json()
    rs = client.get("/closed-form/rs", params={"beta": 1.5, "lambda": -0.5}).json()
    assert shell["value"] == pytest.approx(rs["pressure"], abs=1e-10)


def test_spherical(client):
    body = client.get("/closed-form/spherical", params={"beta": 2.0}).json()
    assert body["value"] == pytest.approx(body["variational_value"], abs=1e-12)
    assert body["variational_q"] == pytest.approx(0.5)
    other = client.get("/closed-form/spherical", params={"beta": 2.0, "r": 0.5}).json()
    assert "variational_value" not in other


def test_susceptibility(client):
    body = client.get("/fluctuations/susceptibility", params={"beta": 0.0}).json()
    assert body["value"] == pytest.approx(1.0)
    assert body["blowup_time"] is None
    body = client.get("/fluctuations/susceptibility", params={"beta": 0.5}).json()
    assert body["value"] == pytest.approx(4.0 / 3.0)
    assert body["blowup_time"] == pytest.approx(4.0)


def test_susceptibility_on_the_critical_line(client):
    response = client.get("/fluctuations/susceptibility", params={"beta": 1.0})
    assert response.status_code == 500
    assert response.json()["detail"]["error"] == "DivergenceError"


def test_rsb_functional_at_the_rs_order_parameter(client):
    payload = {"beta": 2.0, "lambda": 0.0, "x": {"q": [0.25, 0.25], "m": [0.0, 1.0]}}
    body = client.post("/rsb/functional", json=payload).json()
    assert body["value"] == pytest.approx(-0.034074, abs=1e-6)
    assert body["stationarity_residual"] == pytest.approx(0.0, abs=1e-12)
    assert body["entropy_term"] == pytest.approx(0.0625)


def test_rsb_functional_singular(client):
    payload = {"beta": 3.0, "lambda": 1.5, "x": {"q": [1.0], "m": [1.0]}}
    response = client.post("/rsb/functional", json=payload)
    assert response.status_code == 500
    detail = response.json()["detail"]
    assert detail["error"] == "SingularFunctionalError"
    assert detail["diagnostics"]["q"] == [1.0]


def test_rsb_functional_rejects_unordered_breakpoints(client):
    payload = {"beta": 1.0, "x": {"q": [0.5, 0.1], "m": [0.0, 1.0]}}
    assert client.post("/rsb/functional", json=payload).status_code == 422
