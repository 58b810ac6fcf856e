"""
Resource Monitor Service
Tracks system resource usage and decides whether a new simulation job fits
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import psutil

from config import settings

logger = logging.getLogger(__name__)


@dataclass
class SystemMetrics:
    """Snapshot of host load and job counters"""
    cpu_percent: float
    memory_percent: float
    cpu_count: int
    active_jobs: int
    total_jobs_submitted: int
    average_job_seconds: float

    def to_dict(self) -> dict:
        return {
            "cpu_percent": self.cpu_percent,
            "memory_percent": self.memory_percent,
            "cpu_count": self.cpu_count,
            "active_jobs": self.active_jobs,
            "total_jobs_submitted": self.total_jobs_submitted,
            "average_job_seconds": self.average_job_seconds,
        }


class ResourceMonitor:
    """Service for monitoring system resources and gating simulation jobs"""

    def __init__(
        self,
        max_jobs: Optional[int] = None,
        max_memory_percent: Optional[float] = None,
    ):
        """
        Initialize ResourceMonitor

        Args:
            max_jobs: Maximum concurrent jobs (settings.max_concurrent_jobs by default)
            max_memory_percent: Refuse jobs above this memory usage (%)
        """
        self.max_jobs = max_jobs or settings.max_concurrent_jobs
        self.max_memory_percent = max_memory_percent or settings.max_memory_percent

        self.total_jobs_submitted = 0
        self.job_durations: List[float] = []

        logger.info(
            f"ResourceMonitor initialized with max_jobs={self.max_jobs}, "
            f"max_memory={self.max_memory_percent}%"
        )

    def get_system_metrics(self, active_jobs: int) -> SystemMetrics:
        """
        Get current system resource usage metrics

        Args:
            active_jobs: Number of pending or running jobs
        """
        average = sum(self.job_durations) / len(self.job_durations) if self.job_durations else 0.0
        try:
            cpu_percent = psutil.cpu_percent(interval=0.1)
            memory_percent = psutil.virtual_memory().percent
        except Exception as e:
            logger.error(f"Failed to get system metrics: {str(e)}")
            cpu_percent, memory_percent = 0.0, 0.0

        return SystemMetrics(
            cpu_percent=cpu_percent,
            memory_percent=memory_percent,
            cpu_count=psutil.cpu_count(logical=True) or 1,
            active_jobs=active_jobs,
            total_jobs_submitted=self.total_jobs_submitted,
            average_job_seconds=average,
        )

    def record_job(self, duration: Optional[float] = None) -> None:
        """
        Record a submitted job, or the duration of a finished one

        Args:
            duration: Wall-clock seconds of a finished job
        """
        if duration is None:
            self.total_jobs_submitted += 1
            return
        if duration > 0:
            self.job_durations.append(duration)
            # Keep only the last 100 durations
            self.job_durations = self.job_durations[-100:]

    def memory_percent(self) -> float:
        return psutil.virtual_memory().percent

    def can_accept_new_job(self, active_jobs: int) -> Tuple[bool, Optional[str]]:
        """
        Check if the host has capacity for another simulation job

        Args:
            active_jobs: Number of pending or running jobs

        Returns:
            Tuple of (can_accept, reason) where reason is None if the job can
            start, otherwise "max_jobs" or "memory"
        """
        if active_jobs >= self.max_jobs:
            logger.warning(f"Cannot accept new job: limit of {self.max_jobs} concurrent jobs reached")
            return False, "max_jobs"

        try:
            memory = self.memory_percent()
        except Exception as e:
            # fail open
            logger.error(f"Error checking memory usage: {str(e)}")
            return True, None

        if memory > self.max_memory_percent:
            logger.warning(
                f"Cannot accept new job: memory usage {memory:.1f}% > {self.max_memory_percent}%"
            )
            return False, "memory"

        return True, None
