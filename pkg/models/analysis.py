"""
State-evolution trajectories and error-rate predictions.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np

from models.code_params import frozen_array


class SEMode(Enum):
    """How x(tau) is evaluated inside the state-evolution recursion."""
    ASYMPTOTIC = "asymptotic"
    MONTE_CARLO = "montecarlo"


@dataclass(frozen=True)
class SETrajectory:
    """tau2_0 ... tau2_T and x(tau_0) ... x(tau_{T-1})."""
    tau2_seq: Tuple[float, ...]
    x_seq: Tuple[float, ...]
    converged: bool

    @property
    def T(self) -> int:
        return len(self.tau2_seq) - 1

    @property
    def tau2_final(self) -> float:
        return self.tau2_seq[-1]

    def rows(self):
        """(t, tau2_t, x(tau_t)) rows; x is empty for the final entry."""
        for t, tau2 in enumerate(self.tau2_seq):
            x = self.x_seq[t] if t < len(self.x_seq) else None
            yield t, tau2, x

    def to_dict(self) -> dict:
        """Serialize to dictionary"""
        return {
            "tau2": list(self.tau2_seq),
            "x": list(self.x_seq),
            "converged": self.converged,
            "T": self.T,
        }


@dataclass(frozen=True)
class MonteCarloEstimate:
    """A Monte-Carlo mean with its standard error."""
    value: float
    std_error: float
    samples: int

    def to_dict(self) -> dict:
        return {"value": self.value, "std_error": self.std_error, "samples": self.samples}


@dataclass(frozen=True)
class ErrorPrediction:
    """
    Section and codeword error-rate estimates.

    esec is the mean of ``per_section``; ecw = 1 - prod(1 - per_section).
    ``quadrature`` names the rule the closed form settled on.
    """
    esec: float
    ecw: float
    per_section: np.ndarray
    quadrature: str = "gauss_hermite"

    def __post_init__(self):
        object.__setattr__(self, "per_section", frozen_array(self.per_section))

    def to_dict(self) -> dict:
        """Serialize to dictionary"""
        return {
            "esec": self.esec,
            "ecw": self.ecw,
            "per_section": self.per_section.tolist(),
            "quadrature": self.quadrature,
        }
