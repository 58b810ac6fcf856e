"""
Data models for Monte-Carlo sweeps, trial records and simulation jobs.
"""
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from config import settings
from models.power_allocation import PAScheme
from utils.statistics import wilson_interval


class OperatorKind(str, Enum):
    """Design matrix realization."""
    DENSE_GAUSSIAN = "gaussian"
    FAST_HADAMARD = "hadamard"


def _settings_early_stop() -> Optional[float]:
    return None if settings.early_stop == "auto" else float(settings.early_stop)


class TrialConfig(BaseModel):
    """
    Sweep configuration.

    Field names double as CLI flags (``--base-seed`` for ``base_seed``) and as
    keys of a ``--config`` JSON file. The noise variance is fixed at
    ``sigma2`` and P is set per Eb/N0 point from snr = 2R*10^(EbN0/10).
    With ``sigma2 = 0`` the grid still sets P against unit noise, the power
    allocation is designed for that unit noise and the channel adds none.
    """
    L: int = Field(..., ge=1, description="Number of sections")
    M: int = Field(..., ge=2, description="Columns per section (power of two)")
    R: float = Field(..., gt=0, description="User rate in bits per real channel use")
    sigma2: float = Field(
        default=1.0, ge=0, description="Channel noise variance (0: noiseless channel, P set against unit noise)"
    )
    ebn0_grid: List[float] = Field(..., min_length=1, description="Eb/N0 points in dB")
    trials: int = Field(default=100, ge=1, description="Trials per Eb/N0 point")
    base_seed: int = Field(default=0, ge=0, lt=2**64, description="Trial t uses seed base_seed + t")

    pa_scheme: PAScheme = Field(default=PAScheme.ITERATIVE, description="Power allocation scheme")
    rpa: Optional[float] = Field(default=None, ge=0, description="R_PA for the iterative scheme (None: default policy)")
    blocks: Optional[int] = Field(default=None, ge=1, description="Blocks B of the iterative scheme (None: B = L)")
    pa_a: float = Field(default=1.0, ge=0, description="Steepness a of the modified exponential scheme")
    pa_f: float = Field(default=1.0, ge=0, le=1, description="Flattening fraction f of the modified exponential scheme")

    operator: OperatorKind = Field(default=OperatorKind.FAST_HADAMARD, description="Design matrix kind")
    fixed_operator: bool = Field(default=False, description="Reuse one operator (seeded by base_seed) for every trial")

    max_iterations: int = Field(
        default_factory=lambda: settings.max_iterations, ge=1, description="Maximum AMP iterations"
    )
    early_stop: Optional[float] = Field(
        default_factory=_settings_early_stop,
        ge=0,
        description="Early-stop threshold (None: P_L, 0: off)"
    )
    tau_mode: str = Field(default="online", description="online or offline_se")

    outer_alist: Optional[str] = Field(default=None, description="alist file enabling the three-stage decoder")
    minsum_iterations: int = Field(
        default_factory=lambda: settings.minsum_max_iterations, ge=1, description="Maximum min-sum iterations"
    )
    minsum_scaling: float = Field(
        default_factory=lambda: settings.minsum_scaling, gt=0, le=1, description="Normalized min-sum factor"
    )

    workers: int = Field(default=1, ge=0, description="Worker processes (0: one per CPU)")
    store_records: bool = Field(default=False, description="Keep per-trial records in the JSON output")

    @field_validator("M")
    @classmethod
    def validate_power_of_two(cls, v: int) -> int:
        """M must be a power of two."""
        if v & (v - 1):
            raise ValueError(f"M must be a power of two, got {v}")
        return v

    @field_validator("tau_mode")
    @classmethod
    def validate_tau_mode(cls, v: str) -> str:
        if v not in ("online", "offline_se"):
            raise ValueError("tau_mode must be 'online' or 'offline_se'")
        return v

    @model_validator(mode="after")
    def validate_blocks(self) -> "TrialConfig":
        """B must divide L."""
        if self.blocks is not None and self.L % self.blocks:
            raise ValueError(f"blocks={self.blocks} does not divide L={self.L}")
        return self

    model_config = {"frozen": True, "extra": "forbid"}


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one seeded trial."""
    seed: int
    ebn0_db: float
    section_errors: int
    bit_errors: int
    cw_error: bool
    iterations_run: int
    tau2_final: float
    estimated_section_errors: int
    operator_seed: int
    aborted: bool = False
    error: Optional[str] = None
    stage_diagnostics: Optional[dict] = None

    def to_dict(self) -> dict:
        """Serialize to dictionary"""
        out = {
            "seed": self.seed,
            "ebn0_db": self.ebn0_db,
            "section_errors": self.section_errors,
            "bit_errors": self.bit_errors,
            "cw_error": self.cw_error,
            "iterations_run": self.iterations_run,
            "tau2_final": self.tau2_final,
            "estimated_section_errors": self.estimated_section_errors,
            "operator_seed": self.operator_seed,
            "aborted": self.aborted,
        }
        if self.error:
            out["error"] = self.error
        if self.stage_diagnostics is not None:
            out["stage_diagnostics"] = self.stage_diagnostics
        return out

    @classmethod
    def aborted_trial(cls, seed: int, ebn0_db: float, operator_seed: int, reason: str) -> "TrialRecord":
        return cls(
            seed=seed,
            ebn0_db=ebn0_db,
            section_errors=0,
            bit_errors=0,
            cw_error=False,
            iterations_run=0,
            tau2_final=float("nan"),
            estimated_section_errors=0,
            operator_seed=operator_seed,
            aborted=True,
            error=reason,
        )


class JobStatus(Enum):
    """Status of a simulation job."""
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


@dataclass
class SimulationJob:
    """A sweep submitted through the HTTP API."""
    id: str
    config: TrialConfig
    status: JobStatus = JobStatus.PENDING
    progress: int = 0  # 0-100
    error_message: Optional[str] = None
    result: Optional[dict] = None
    created_at: datetime = field(default_factory=datetime.now)
    started_at: Optional[datetime] = None
    completed_at: Optional[datetime] = None

    @property
    def is_active(self) -> bool:
        return self.status in (JobStatus.PENDING, JobStatus.RUNNING)

    def to_dict(self, include_result: bool = False) -> dict:
        """Serialize job to dictionary."""
        out: Dict[str, object] = {
            "id": self.id,
            "status": self.status.value,
            "progress": self.progress,
            "error": self.error_message,
            "created_at": self.created_at.isoformat(),
            "started_at": self.started_at.isoformat() if self.started_at else None,
            "completed_at": self.completed_at.isoformat() if self.completed_at else None,
        }
        if include_result:
            out["result"] = self.result
        return out


# Trials with more section errors than this count as high-error outliers
HIGH_ERROR_SECTIONS = 8


@dataclass
class SweepPoint:
    """
    Aggregate over the trials at one Eb/N0.

    Totals are kept as integers so two partial runs merge exactly.
    """
    ebn0_db: float
    L: int
    n_bits: int
    trials: int = 0
    aborted: int = 0
    section_error_total: int = 0
    bit_error_total: int = 0
    cw_error_total: int = 0
    iteration_total: int = 0
    histogram: Dict[int, int] = field(default_factory=dict)
    predicted_esec: Optional[float] = None
    predicted_ecw: Optional[float] = None

    def add(self, record: TrialRecord) -> None:
        """Fold one trial record into the totals."""
        if record.aborted:
            self.aborted += 1
            return
        self.trials += 1
        self.section_error_total += record.section_errors
        self.bit_error_total += record.bit_errors
        self.cw_error_total += int(record.cw_error)
        self.iteration_total += record.iterations_run
        self.histogram[record.section_errors] = self.histogram.get(record.section_errors, 0) + 1

    def merge(self, other: "SweepPoint") -> "SweepPoint":
        """Combine two aggregates of the same Eb/N0 point."""
        histogram = dict(self.histogram)
        for errors, count in other.histogram.items():
            histogram[errors] = histogram.get(errors, 0) + count
        return SweepPoint(
            ebn0_db=self.ebn0_db,
            L=self.L,
            n_bits=self.n_bits,
            trials=self.trials + other.trials,
            aborted=self.aborted + other.aborted,
            section_error_total=self.section_error_total + other.section_error_total,
            bit_error_total=self.bit_error_total + other.bit_error_total,
            cw_error_total=self.cw_error_total + other.cw_error_total,
            iteration_total=self.iteration_total + other.iteration_total,
            histogram=histogram,
            predicted_esec=self.predicted_esec,
            predicted_ecw=self.predicted_ecw,
        )

    @property
    def esec_mean(self) -> float:
        return self.section_error_total / (self.L * self.trials) if self.trials else float("nan")

    @property
    def ber_mean(self) -> float:
        return self.bit_error_total / (self.n_bits * self.trials) if self.trials else float("nan")

    @property
    def cwer(self) -> float:
        return self.cw_error_total / self.trials if self.trials else float("nan")

    @property
    def avg_iters(self) -> float:
        return self.iteration_total / self.trials if self.trials else float("nan")

    @property
    def error_free_fraction(self) -> float:
        return self.histogram.get(0, 0) / self.trials if self.trials else float("nan")

    @property
    def high_error_fraction(self) -> float:
        if not self.trials:
            return float("nan")
        heavy = sum(count for errors, count in self.histogram.items() if errors > HIGH_ERROR_SECTIONS)
        return heavy / self.trials

    def cwer_interval(self) -> Tuple[float, float]:
        return wilson_interval(self.cw_error_total, self.trials)

    def to_row(self) -> dict:
        """CSV row with the documented column order."""
        lo, hi = self.cwer_interval()
        return {
            "ebn0_db": self.ebn0_db,
            "trials": self.trials,
            "esec_mean": self.esec_mean,
            "ber_mean": self.ber_mean,
            "cwer": self.cwer,
            "cwer_ci_lo": lo,
            "cwer_ci_hi": hi,
            "avg_iters": self.avg_iters,
        }

    def to_dict(self) -> dict:
        """Serialize to dictionary"""
        out = self.to_row()
        out.update({
            "aborted": self.aborted,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
            "error_free_fraction": self.error_free_fraction,
            "high_error_fraction": self.high_error_fraction,
            "predicted_esec": self.predicted_esec,
            "predicted_ecw": self.predicted_ecw,
        })
        return out


@dataclass
class SweepResult:
    """Aggregates (and optionally records) of one Eb/N0 sweep."""
    config: TrialConfig
    points: List[SweepPoint]
    records: List[TrialRecord] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self, include_records: Optional[bool] = None) -> dict:
        """Serialize to dictionary; records follow config.store_records unless overridden."""
        include = self.config.store_records if include_records is None else include_records
        out = {
            "config": self.config.model_dump(mode="json"),
            "metadata": self.metadata,
            "points": [p.to_dict() for p in self.points],
        }
        if include:
            out["records"] = [r.to_dict() for r in self.records]
        return out
