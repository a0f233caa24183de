from fastapi.testclient import TestClient

from app.server import app
from app.settings import get_settings

client = TestClient(app)


def test_health():
    assert client.get("/health").json() == {"status": "ok"}


def test_solve_job_runs_to_completion(scenario_dict):
    res = client.post("/jobs/solve", json=scenario_dict(p=0.1))
    assert res.status_code == 200
    job_id = res.json()["job_id"]

    # BackgroundTasks は TestClient ではレスポンス返却前に完了する
    job = client.get(f"/jobs/{job_id}").json()
    assert job["status"] == "done"
    assert job["exit_code"] == 0
    assert job["report"]["status"] == "converged"

    summary = client.get(f"/jobs/{job_id}/summary")
    assert summary.status_code == 200
    assert "<h1>" in summary.text


def test_accepted_response_carries_poll_interval(scenario_dict):
    body = client.post("/jobs/analyze", json=scenario_dict(p=0.1)).json()
    assert set(body) == {"job_id", "status", "poll_interval"}
    assert body["status"] == "queued"
    assert body["poll_interval"] == get_settings().poll_interval_seconds


def test_failed_job_records_error(scenario_dict):
    data = scenario_dict(p=0.3, sim={"runs": 2, "horizon": 5})
    job_id = client.post("/jobs/simulate", json=data).json()["job_id"]
    job = client.get(f"/jobs/{job_id}").json()
    assert job["status"] == "failed"
    assert job["exit_code"] == 3
    assert any("Job failed" in line for line in job["logs"])
    assert client.get(f"/jobs/{job_id}/summary").status_code == 409


def test_invalid_scenario_is_rejected(scenario_dict):
    data = scenario_dict()
    data["spec"]["p"] = [2.0]
    res = client.post("/jobs/analyze", json=data)
    assert res.status_code == 422
    assert "spec -> p" in res.json()["detail"]


def test_unknown_job_and_command():
    assert client.get("/jobs/missing").status_code == 404
    assert client.post("/jobs/explode", json={}).status_code == 422
