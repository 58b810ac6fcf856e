"""
Simulation Job Endpoints
Submit Monte-Carlo sweeps and poll their status
"""
import logging

from fastapi import APIRouter, status

from models.simulation import JobStatus, TrialConfig
from utils.results import to_plain

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("/jobs", status_code=status.HTTP_202_ACCEPTED)
async def submit_job(config: TrialConfig):
    """
    Start a sweep in the background

    Returns the job id; poll GET /jobs/{id} for progress.
    """
    from main import job_manager

    job = await job_manager.submit(config)
    return job.to_dict()


@router.get("/jobs")
async def list_jobs():
    from main import job_manager

    jobs = job_manager.list_jobs()
    return {"jobs": [job.to_dict() for job in jobs], "active": job_manager.get_active_job_count()}


@router.get("/jobs/{job_id}")
async def get_job(job_id: str):
    """Status and progress; the result is included once the job completed."""
    from main import job_manager

    job = job_manager.get_job(job_id)
    return to_plain(job.to_dict(include_result=job.status is JobStatus.COMPLETED))


@router.get("/jobs/{job_id}/result")
async def get_job_result(job_id: str):
    """Sweep result of a completed job (409 until then)."""
    from main import job_manager

    return to_plain(job_manager.get_result(job_id))
