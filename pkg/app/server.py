from __future__ import annotations

import uuid
from typing import Any, Dict

from fastapi import BackgroundTasks, Body, FastAPI, HTTPException
from fastapi.responses import HTMLResponse

from app.report_renderer import SummaryRenderer
from app.settings import configure_logging, get_settings
from domain.errors import ScenarioError
from domain.models import Command, JobAccepted, JobStatus, ScenarioJob
from infrastructure.persistence.in_memory_job_store import InMemoryJobStore
from infrastructure.reporting.markdown_renderer import DefaultMarkdownRenderer
from infrastructure.scenario.loader import scenario_from_dict
from usecases.run_scenario_job import resolve_options, run_scenario_job

app = FastAPI(title="dncs-riccati")
job_store = InMemoryJobStore()
settings = get_settings()
summary_renderer = SummaryRenderer()
markdown_renderer = DefaultMarkdownRenderer()
configure_logging(settings)


@app.post("/jobs/{command}", response_model=JobAccepted)
def create_job(command: Command, background_tasks: BackgroundTasks, scenario: Dict[str, Any] = Body(...)):
    try:
        parsed = scenario_from_dict(scenario, source="request body")
    except ScenarioError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc

    job_id = str(uuid.uuid4())
    job = ScenarioJob(job_id=job_id, command=command, scenario_name=parsed.name, status=JobStatus.queued)
    job_store.create(job)

    options = resolve_options(parsed, settings.run_defaults())
    background_tasks.add_task(run_scenario_job, job_id, command, parsed, options, job_store, summary_renderer)
    return JobAccepted(job_id=job_id, status=job.status, poll_interval=settings.poll_interval_seconds)


def _get_job(job_id: str) -> ScenarioJob:
    job = job_store.get(job_id)
    if not job:
        raise HTTPException(status_code=404, detail="Job not found")
    return job


@app.get("/jobs/{job_id}")
def job_status(job_id: str):
    return _get_job(job_id).dict()


@app.get("/jobs/{job_id}/summary", response_class=HTMLResponse)
def job_summary(job_id: str):
    job = _get_job(job_id)
    if job.summary is None:
        raise HTTPException(status_code=409, detail=f"Job is {job.status.value}; no summary yet")
    return HTMLResponse(markdown_renderer.to_html(job.summary))


@app.get("/health")
def health():
    return {"status": "ok"}
