"""
AMP decoder configuration and state.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from config import settings
from exceptions import InvalidParameterError
from models.code_params import frozen_array


class TauMode(Enum):
    """Source of the effective noise variance used by the denoiser."""
    ONLINE = "online"
    OFFLINE_SE = "offline_se"


class Termination(Enum):
    """Why the decoder stopped."""
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"


@dataclass(frozen=True)
class DecoderConfig:
    """
    AMP decoder knobs.

    ``early_stop_threshold`` of None means "use P_L of the allocation being
    decoded"; 0 disables early termination.
    """
    max_iterations: int = 64
    early_stop_threshold: Optional[float] = None
    tau_mode: TauMode = TauMode.ONLINE

    def __post_init__(self):
        if self.max_iterations < 1:
            raise InvalidParameterError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.early_stop_threshold is not None and self.early_stop_threshold < 0:
            raise InvalidParameterError(
                f"early_stop_threshold must be >= 0, got {self.early_stop_threshold}"
            )

    @classmethod
    def from_settings(cls, **overrides) -> "DecoderConfig":
        """Build a config from the environment settings, applying overrides."""
        early_stop = None if settings.early_stop == "auto" else float(settings.early_stop)
        values = {
            "max_iterations": settings.max_iterations,
            "early_stop_threshold": early_stop,
            "tau_mode": TauMode.ONLINE,
        }
        values.update(overrides)
        return cls(**values)

    def resolve_threshold(self, smallest_power: float) -> float:
        return smallest_power if self.early_stop_threshold is None else self.early_stop_threshold

    def to_dict(self) -> dict:
        """Serialize to dictionary"""
        return {
            "max_iterations": self.max_iterations,
            "early_stop_threshold": self.early_stop_threshold,
            "tau_mode": self.tau_mode.value,
        }


@dataclass(frozen=True)
class DecoderState:
    """
    Result of one AMP run.

    ``beta`` is the last soft estimate beta^T, ``z`` the last modified
    residual and ``tau2_trace`` holds tau2_0 ... tau2_{T-1} as used by the
    denoiser (online estimates or the offline schedule).
    """
    beta: np.ndarray
    z: np.ndarray
    tau2_trace: Tuple[float, ...]
    iterations_run: int
    termination: Termination
    section_mask: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "beta", frozen_array(self.beta))
        object.__setattr__(self, "z", frozen_array(self.z))
        object.__setattr__(self, "tau2_trace", tuple(float(t) for t in self.tau2_trace))
        if self.section_mask is not None:
            object.__setattr__(self, "section_mask", frozen_array(self.section_mask, dtype=bool))

    @property
    def tau2_final(self) -> float:
        return self.tau2_trace[-1]

    def to_dict(self) -> dict:
        """Serialize to dictionary (vectors omitted)"""
        return {
            "iterations_run": self.iterations_run,
            "termination": self.termination.value,
            "tau2_trace": list(self.tau2_trace),
        }
