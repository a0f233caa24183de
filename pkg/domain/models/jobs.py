from __future__ import annotations

from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class Command(str, Enum):
    analyze = "analyze"
    solve = "solve"
    simulate = "simulate"
    verify = "verify"
    finite = "finite"


class JobStatus(str, Enum):
    queued = "queued"
    running = "running"
    done = "done"
    failed = "failed"


class ScenarioJob(BaseModel):
    """シナリオ 1 件に対するコマンド実行の状態。"""

    job_id: str
    command: Command
    scenario_name: str = ""
    status: JobStatus = JobStatus.queued
    started_at: Optional[str] = None
    finished_at: Optional[str] = None
    exit_code: Optional[int] = None
    logs: List[str] = Field(default_factory=list)
    report: Optional[Dict[str, Any]] = None
    summary: Optional[str] = None

    class Config:
        extra = "forbid"


class JobAccepted(BaseModel):
    """POST /jobs/{command} の応答。クライアントは poll_interval 秒ごとに GET /jobs/{job_id} を叩く。"""

    job_id: str
    status: JobStatus
    poll_interval: int = Field(..., ge=1, description="GET /jobs/{job_id} を再試行するまでの秒数")
