"""Job execution facade shared by the HTTP routes and the in-process CLI."""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from typing import Optional

from ..config import config_from_dict
from ..pipeline import STAGES, run_stages
from .schemas import JobOutputs, JobRequest, JobStatus


def execute_job(request: JobRequest) -> JobStatus:
    """Run a pipeline job synchronously and report its outcome."""
    job_id = uuid.uuid4().hex[:12]
    stages = request.stages or list(STAGES)
    try:
        cfg = config_from_dict(request.config)
        result = run_stages(cfg, stages)
    except Exception as exc:  # surface, don't crash the service
        return JobStatus(job_id=job_id, status="failed", stages=stages, error=str(exc))
    return JobStatus(
        job_id=job_id,
        status="done",
        stages=result.stages_run,
        warnings=result.warnings,
        outputs=JobOutputs(
            trailer_path=result.trailer_path,
            log_path=result.log_path,
            duration_s=result.duration_s,
        ),
    )


@dataclass
class JobStore:
    """In-memory registry of background jobs."""

    jobs: dict[str, JobStatus] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def submit(self, request: JobRequest) -> JobStatus:
        job_id = uuid.uuid4().hex[:12]
        stages = request.stages or list(STAGES)
        status = JobStatus(job_id=job_id, status="queued", stages=stages)
        with self.lock:
            self.jobs[job_id] = status
        thread = threading.Thread(target=self._run, args=(job_id, request), daemon=True)
        thread.start()
        return status

    def _run(self, job_id: str, request: JobRequest) -> None:
        with self.lock:
            self.jobs[job_id] = self.jobs[job_id].model_copy(update={"status": "running"})
        finished = execute_job(request)
        finished = finished.model_copy(update={"job_id": job_id})
        with self.lock:
            self.jobs[job_id] = finished

    def get(self, job_id: str) -> Optional[JobStatus]:
        with self.lock:
            return self.jobs.get(job_id)
