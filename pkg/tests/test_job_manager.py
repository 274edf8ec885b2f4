from scinc.models.schemas import JobStatus
from scinc.utils.job_manager import SolveJobManager


def test_job_lifecycle():
    manager = SolveJobManager()
    job = manager.create_job("abc12345-run")
    assert job.status == JobStatus.PENDING and job.started_at is None

    manager.update_job("abc12345-run", status=JobStatus.PHASE_TWO, progress=40, phase2_iters=7)
    job = manager.get_job("abc12345-run")
    assert job.progress == 40 and job.phase2_iters == 7
    assert job.started_at is not None and job.completed_at is None

    manager.update_job("abc12345-run", status=JobStatus.COMPLETED, result="out.json")
    job = manager.get_job("abc12345-run")
    assert job.completed_at is not None
    assert job.result == "out.json"

    manager.delete_job("abc12345-run")
    assert manager.get_job("abc12345-run") is None


def test_unknown_job_is_ignored():
    assert SolveJobManager().update_job("nada", status=JobStatus.FAILED) is None
