from __future__ import annotations

import threading
from typing import Dict, List, Optional

from domain.models import ScenarioJob
from usecases.ports import JobStorePort


class InMemoryJobStore(JobStorePort):
    """スレッドセーフなメモリ上のジョブストア。取り出す値はコピーなので呼び出し側の変更は update で反映する。"""

    def __init__(self) -> None:
        self._jobs: Dict[str, ScenarioJob] = {}
        self._lock = threading.Lock()

    def create(self, job: ScenarioJob) -> None:
        with self._lock:
            if job.job_id in self._jobs:
                raise KeyError(f"job {job.job_id} already exists")
            self._jobs[job.job_id] = job.copy(deep=True)

    def get(self, job_id: str) -> Optional[ScenarioJob]:
        with self._lock:
            job = self._jobs.get(job_id)
            return job.copy(deep=True) if job else None

    def update(self, job: ScenarioJob) -> None:
        with self._lock:
            self._jobs[job.job_id] = job.copy(deep=True)

    def list_ids(self) -> List[str]:
        with self._lock:
            return list(self._jobs)
