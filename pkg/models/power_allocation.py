"""
Power allocation model.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict

import numpy as np

from exceptions import InvalidParameterError
from models.code_params import frozen_array


class PAScheme(Enum):
    """How a power allocation was constructed."""
    FLAT = "flat"
    EXPONENTIAL = "exponential"
    MODIFIED_EXPONENTIAL = "modified_exponential"
    ITERATIVE = "iterative"


# Relative slack used for the sum and monotonicity checks
_SUM_RTOL = 1e-9
_ORDER_RTOL = 1e-12


@dataclass(frozen=True)
class PowerAllocation:
    """
    Per-section powers {P_l}, non-increasing and summing to P.

    ``parameters`` records the constructor inputs (C, a, f, B, R_PA, ...).
    """
    powers: np.ndarray
    P: float
    scheme: PAScheme
    parameters: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        powers = frozen_array(self.powers)
        if powers.ndim != 1 or powers.size < 1:
            raise InvalidParameterError("A power allocation needs at least one section")
        if np.any(powers < 0) or not np.all(np.isfinite(powers)):
            raise InvalidParameterError("Section powers must be finite and non-negative")
        total = float(powers.sum())
        if abs(total - self.P) > _SUM_RTOL * self.P:
            raise InvalidParameterError(
                f"Section powers sum to {total}, expected P={self.P}",
                "Normalize the allocation before constructing it"
            )
        if np.any(np.diff(powers) > _ORDER_RTOL * self.P):
            raise InvalidParameterError("Section powers must be non-increasing")
        object.__setattr__(self, "powers", powers)
        object.__setattr__(self, "parameters", dict(self.parameters))

    @property
    def L(self) -> int:
        return int(self.powers.size)

    @property
    def smallest(self) -> float:
        """P_L, the power of the last section."""
        return float(self.powers[-1])

    def amplitudes(self, n: int) -> np.ndarray:
        """Non-zero values sqrt(n * P_l) of a message vector."""
        return np.sqrt(n * self.powers)

    def to_dict(self) -> dict:
        """Serialize to dictionary"""
        return {
            "scheme": self.scheme.value,
            "P": self.P,
            "parameters": self.parameters,
            "powers": self.powers.tolist(),
        }
