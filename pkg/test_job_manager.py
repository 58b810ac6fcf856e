"""
Tests for the background job manager and the resource gate
"""
import json

import pytest

from exceptions import JobNotFoundError, JobNotReadyError, MaxJobsError, MemoryLimitError
from models.simulation import JobStatus, TrialConfig
from services.job_manager import JobManager
from services.resource_monitor import ResourceMonitor


def _config(**overrides) -> TrialConfig:
    values = {"L": 64, "M": 16, "R": 0.5, "ebn0_grid": [15.0], "trials": 3}
    values.update(overrides)
    return TrialConfig(**values)


@pytest.fixture
def monitor(mocker):
    monitor = ResourceMonitor(max_jobs=2, max_memory_percent=90)
    mocker.patch.object(monitor, "memory_percent", return_value=10.0)
    return monitor


class TestResourceMonitor:

    def test_accepts_below_limits(self, monitor):
        assert monitor.can_accept_new_job(0) == (True, None)

    def test_job_limit(self, monitor):
        assert monitor.can_accept_new_job(2) == (False, "max_jobs")

    def test_memory_limit(self, monitor, mocker):
        mocker.patch.object(monitor, "memory_percent", return_value=95.0)
        assert monitor.can_accept_new_job(0) == (False, "memory")

    def test_fails_open_when_memory_is_unknown(self, monitor, mocker):
        mocker.patch.object(monitor, "memory_percent", side_effect=OSError("no /proc"))
        assert monitor.can_accept_new_job(0) == (True, None)

    def test_job_durations(self, monitor):
        monitor.record_job()
        monitor.record_job(2.0)
        monitor.record_job(4.0)
        metrics = monitor.get_system_metrics(active_jobs=1)
        assert metrics.total_jobs_submitted == 1
        assert metrics.average_job_seconds == pytest.approx(3.0)
        assert metrics.to_dict()["active_jobs"] == 1


class TestJobManager:

    async def test_completed_job(self, monitor, tmp_path):
        manager = JobManager(resource_monitor=monitor, results_dir=str(tmp_path))
        job = await manager.submit(_config())
        assert job.status in (JobStatus.PENDING, JobStatus.RUNNING)
        await manager.wait(job.id)

        assert job.status is JobStatus.COMPLETED
        assert job.progress == 100
        result = manager.get_result(job.id)
        assert result["points"][0]["trials"] == 3
        saved = json.loads((tmp_path / f"{job.id}.json").read_text())
        assert saved["points"][0]["esec_mean"] == 0.0
        assert manager.get_active_job_count() == 0

    async def test_failed_job(self, monitor, mocker):
        mocker.patch("services.job_manager.run_trials", side_effect=RuntimeError("worker crashed"))
        manager = JobManager(resource_monitor=monitor)
        job = await manager.submit(_config())
        await manager.wait(job.id)
        assert job.status is JobStatus.FAILED
        assert job.error_message == "worker crashed"
        with pytest.raises(JobNotReadyError):
            manager.get_result(job.id)

    async def test_result_not_ready(self, monitor, mocker):
        manager = JobManager(resource_monitor=monitor)
        mocker.patch.object(manager, "_run", new=mocker.AsyncMock())
        job = await manager.submit(_config())
        with pytest.raises(JobNotReadyError):
            manager.get_result(job.id)

    async def test_job_limit(self, mocker):
        monitor = ResourceMonitor(max_jobs=1)
        mocker.patch.object(monitor, "memory_percent", return_value=10.0)
        manager = JobManager(resource_monitor=monitor)
        mocker.patch.object(manager, "_run", new=mocker.AsyncMock())
        await manager.submit(_config())
        with pytest.raises(MaxJobsError):
            await manager.submit(_config())

    async def test_memory_limit(self, monitor, mocker):
        mocker.patch.object(monitor, "memory_percent", return_value=99.0)
        manager = JobManager(resource_monitor=monitor)
        with pytest.raises(MemoryLimitError):
            await manager.submit(_config())
        assert manager.jobs == {}

    async def test_unknown_job(self, monitor):
        manager = JobManager(resource_monitor=monitor)
        with pytest.raises(JobNotFoundError):
            manager.get_job("missing")
        with pytest.raises(JobNotFoundError):
            manager.get_result("missing")

    async def test_list_and_shutdown(self, monitor):
        manager = JobManager(resource_monitor=monitor)
        first = await manager.submit(_config())
        second = await manager.submit(_config(trials=2))
        await manager.shutdown()
        assert [job.id for job in manager.list_jobs()] == [first.id, second.id]
        assert all(job.status is JobStatus.COMPLETED for job in manager.list_jobs())
