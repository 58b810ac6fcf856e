"""
Configuration management using Pydantic Settings
"""
from typing import Union

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Toolkit settings loaded from environment variables (SPARC_ prefix)"""

    # AMP decoder
    max_iterations: int = Field(default=64, description="Maximum AMP iterations per decode")
    early_stop: Union[float, str] = Field(
        default="auto",
        description="Early-stop threshold on |tau2_t - tau2_{t-1}|: 'auto' uses P_L, a number overrides, 0 disables"
    )
    remaining_error_slack: float = Field(
        default=0.5,
        description="Slack for the runtime section-error estimate, as a multiple of P_L"
    )

    # State evolution and error prediction
    quad_points: int = Field(default=61, description="Gauss-Hermite points for closed-form predictions")
    se_tolerance: float = Field(default=1e-6, description="SE stopping tolerance relative to sigma2 + P")
    se_max_iterations: int = Field(default=2000, description="Maximum state-evolution iterations")
    mc_samples: int = Field(default=10000, description="Default Monte-Carlo sample count for SE estimators")

    # Outer code
    minsum_scaling: float = Field(default=0.75, description="Check-node scaling of normalized min-sum")
    minsum_max_iterations: int = Field(default=50, description="Maximum min-sum iterations")
    llr_clamp: float = Field(default=30.0, description="Absolute clamp applied to section-derived LLRs")

    # Power allocation
    rpa_sweep_step: float = Field(default=0.02, description="R_PA sweep step as a multiple of R")

    # Simulation and capacity
    default_workers: int = Field(default=0, description="Trial worker processes; 0 uses the logical CPU count")
    max_concurrent_jobs: int = Field(default=2, description="Simulation jobs the API runs at once")
    max_memory_percent: float = Field(default=90.0, description="Refuse new jobs above this memory usage (%)")
    dense_operator_max_entries: int = Field(
        default=50_000_000,
        description="Largest n*M*L a dense Gaussian operator may materialize"
    )

    # Paths and logging
    results_dir: str = Field(default="results", description="Directory for CSV/JSON sweep results")
    log_level: str = Field(default="INFO", description="Root logging level")
    cors_origins: str = Field(
        default="http://localhost:3000,http://127.0.0.1:3000",
        description="Comma-separated origins allowed by the API"
    )

    @field_validator("max_iterations", "se_max_iterations", "mc_samples", "minsum_max_iterations")
    @classmethod
    def validate_positive_count(cls, v: int) -> int:
        """Iteration and sample counts must be at least one."""
        if v < 1:
            raise ValueError("must be >= 1")
        return v

    @field_validator("quad_points")
    @classmethod
    def validate_quad_points(cls, v: int) -> int:
        """Quadrature order must be at least one."""
        if v < 1:
            raise ValueError("quad_points must be >= 1")
        return v

    @field_validator("early_stop")
    @classmethod
    def validate_early_stop(cls, v: Union[float, str]) -> Union[float, str]:
        """Accept 'auto' or a non-negative threshold."""
        if isinstance(v, str):
            if v.strip().lower() == "auto":
                return "auto"
            v = float(v)
        if v < 0:
            raise ValueError("early_stop must be 'auto' or >= 0")
        return float(v)

    @field_validator(
        "remaining_error_slack", "se_tolerance", "minsum_scaling", "llr_clamp", "rpa_sweep_step"
    )
    @classmethod
    def validate_non_negative(cls, v: float) -> float:
        """Thresholds and factors cannot be negative."""
        if v < 0:
            raise ValueError("must be >= 0")
        return v

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Normalize the logging level name."""
        level = v.strip().upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"Unknown log level: {v}")
        return level

    class Config:
        env_prefix = "SPARC_"
        env_file = ".env"
        env_file_encoding = "utf-8"
        extra = "ignore"


settings = Settings()
