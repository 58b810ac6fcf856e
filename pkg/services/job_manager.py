"""
Job Manager Service
Runs simulation sweeps submitted through the API in the background
"""
import asyncio
import logging
import time
import uuid
from datetime import datetime
from functools import partial
from pathlib import Path
from typing import Dict, List, Optional

from exceptions import JobNotFoundError, JobNotReadyError, MaxJobsError, MemoryLimitError
from models.simulation import JobStatus, SimulationJob, TrialConfig
from services.resource_monitor import ResourceMonitor
from services.simulator import run_trials
from utils.results import write_json

logger = logging.getLogger(__name__)


class JobManager:
    """Service for the lifecycle of background simulation jobs"""

    def __init__(
        self,
        resource_monitor: Optional[ResourceMonitor] = None,
        results_dir: Optional[str] = None,
    ):
        """
        Initialize JobManager

        Args:
            resource_monitor: Capacity gate (a default ResourceMonitor if None)
            results_dir: Directory where finished results are written as
                <job id>.json; nothing is written when None
        """
        self.resource_monitor = resource_monitor or ResourceMonitor()
        self.results_dir = Path(results_dir) if results_dir else None
        self.jobs: Dict[str, SimulationJob] = {}
        self._tasks: Dict[str, asyncio.Task] = {}
        logger.info(
            f"JobManager initialized with max_jobs={self.resource_monitor.max_jobs}, "
            f"results_dir={self.results_dir}"
        )

    def get_active_job_count(self) -> int:
        return sum(1 for job in self.jobs.values() if job.is_active)

    async def submit(self, config: TrialConfig) -> SimulationJob:
        """
        Start a sweep in the event loop's executor

        Raises:
            MaxJobsError: When max_concurrent_jobs jobs are already active
            MemoryLimitError: When memory usage is above max_memory_percent
        """
        can_accept, reason = self.resource_monitor.can_accept_new_job(self.get_active_job_count())
        if not can_accept:
            if reason == "memory":
                raise MemoryLimitError(self.resource_monitor.memory_percent())
            raise MaxJobsError(self.resource_monitor.max_jobs)

        job = SimulationJob(id=str(uuid.uuid4()), config=config)
        self.jobs[job.id] = job
        self.resource_monitor.record_job()
        self._tasks[job.id] = asyncio.create_task(self._run(job))
        logger.info(
            f"Submitted job {job.id}: L={config.L}, M={config.M}, R={config.R}, "
            f"{len(config.ebn0_grid)} points x {config.trials} trials"
        )
        return job

    async def _run(self, job: SimulationJob) -> None:
        job.status = JobStatus.RUNNING
        job.started_at = datetime.now()
        started = time.time()

        def on_progress(done: int, total: int) -> None:
            job.progress = int(100 * done / total)

        loop = asyncio.get_running_loop()
        try:
            result = await loop.run_in_executor(
                None, partial(run_trials, job.config, False, on_progress)
            )
            job.result = result.to_dict()
            if self.results_dir is not None:
                write_json(job.result, self.results_dir / f"{job.id}.json")
            job.status = JobStatus.COMPLETED
            job.progress = 100
            logger.info(f"Job {job.id} completed in {time.time() - started:.1f}s")
        except Exception as e:
            job.status = JobStatus.FAILED
            job.error_message = str(e)
            logger.error(f"Job {job.id} failed: {str(e)}", exc_info=True)
        finally:
            job.completed_at = datetime.now()
            self.resource_monitor.record_job(time.time() - started)

    def get_job(self, job_id: str) -> SimulationJob:
        """
        Raises:
            JobNotFoundError: For unknown ids
        """
        job = self.jobs.get(job_id)
        if job is None:
            raise JobNotFoundError(job_id)
        return job

    def get_result(self, job_id: str) -> dict:
        """
        Result of a completed job

        Raises:
            JobNotFoundError: For unknown ids
            JobNotReadyError: While the job is pending or running, or after it failed
        """
        job = self.get_job(job_id)
        if job.status is not JobStatus.COMPLETED:
            raise JobNotReadyError(job_id, job.status.value)
        return job.result

    def list_jobs(self) -> List[SimulationJob]:
        return sorted(self.jobs.values(), key=lambda job: job.created_at)

    async def wait(self, job_id: str) -> SimulationJob:
        """Wait until a job has finished."""
        job = self.get_job(job_id)
        task = self._tasks.get(job_id)
        if task is not None:
            await task
        return job

    async def shutdown(self) -> None:
        """Wait for running jobs; executor threads cannot be interrupted."""
        pending = [task for task in self._tasks.values() if not task.done()]
        if pending:
            logger.info(f"Waiting for {len(pending)} running jobs before shutdown")
            await asyncio.gather(*pending, return_exceptions=True)
