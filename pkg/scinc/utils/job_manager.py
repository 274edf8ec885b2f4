import threading
from datetime import datetime
from typing import Any, Dict, Optional

from scinc.models.schemas import JobStatus, SolveJobStatus
from scinc.utils.logger import log_job_status


class SolveJobManager:
    """Registro en memoria de las corridas del solver (una por job_id)."""

    def __init__(self):
        self.jobs: Dict[str, SolveJobStatus] = {}
        self._lock = threading.Lock()

    def create_job(self, job_id: str) -> SolveJobStatus:
        """Crea un nuevo trabajo"""
        now = datetime.now().isoformat()
        job = SolveJobStatus(
            job_id=job_id,
            status=JobStatus.PENDING,
            message="Trabajo creado, esperando resolución",
            progress=0,
            errors=[],
            result=None,
            created_at=now,
            updated_at=now,
        )
        with self._lock:
            self.jobs[job_id] = job
        return job

    def update_job(
        self,
        job_id: str,
        status: JobStatus = None,
        message: str = None,
        progress: int = None,
        phase1_iters: int = None,
        phase2_iters: int = None,
        errors: list = None,
        result: Any = None,
    ) -> Optional[SolveJobStatus]:
        """Actualiza el estado de un trabajo"""
        with self._lock:
            job = self.jobs.get(job_id)
            if job is None:
                return None

            if status:
                if status != job.status:
                    log_job_status(job_id, status.value, message or job.message)
                job.status = status
            if message:
                job.message = message
            if progress is not None:
                job.progress = progress
            if phase1_iters is not None:
                job.phase1_iters = phase1_iters
            if phase2_iters is not None:
                job.phase2_iters = phase2_iters
            if errors is not None:
                job.errors = errors
            if result is not None:
                job.result = result

            now = datetime.now().isoformat()
            job.updated_at = now
            if status in (JobStatus.PHASE_ONE, JobStatus.PHASE_TWO) and not job.started_at:
                job.started_at = now
            if status in (JobStatus.COMPLETED, JobStatus.FAILED, JobStatus.BUDGET_EXCEEDED):
                job.completed_at = now
            return job

    def delete_job(self, job_id: str):
        with self._lock:
            self.jobs.pop(job_id, None)

    def get_job(self, job_id: str) -> Optional[SolveJobStatus]:
        return self.jobs.get(job_id)


job_manager = SolveJobManager()
