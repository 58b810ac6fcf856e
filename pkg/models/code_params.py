"""
Dimensional parameters, message vectors and error metrics shared by every module.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from exceptions import DimensionMismatchError, InvalidParameterError


def is_power_of_two(value: int) -> bool:
    """True when value is a positive integral power of two (1 included)."""
    return isinstance(value, (int, np.integer)) and value >= 1 and (value & (value - 1)) == 0


def frozen_array(values, dtype=float) -> np.ndarray:
    """Copy ``values`` into a read-only numpy array."""
    array = np.array(values, dtype=dtype, copy=True)
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class CodeParams:
    """
    The tuple (L, M, n, R, P, sigma2) describing one SPARC.

    R is the nominal communication rate. When an outer code is used it is the
    user rate, so n * R covers only the user bits; ``sparc_rate`` is always the
    realized L*log2(M)/n.
    """
    L: int
    M: int
    n: int
    R: float
    P: float
    sigma2: float

    def __post_init__(self):
        if self.L < 1:
            raise InvalidParameterError(f"L must be >= 1, got {self.L}")
        if not is_power_of_two(self.M):
            raise InvalidParameterError(
                f"M must be a power of two, got {self.M}",
                "Choose M from 2, 4, 8, ..., 2**k"
            )
        if self.n < 1:
            raise InvalidParameterError(f"n must be >= 1, got {self.n}")
        if not self.R > 0:
            raise InvalidParameterError(f"R must be > 0, got {self.R}")
        if not self.P > 0:
            raise InvalidParameterError(f"P must be > 0, got {self.P}")
        if self.sigma2 < 0:
            raise InvalidParameterError(f"sigma2 must be >= 0, got {self.sigma2}")

    @property
    def log_m(self) -> int:
        return int(self.M).bit_length() - 1

    @property
    def message_bits(self) -> int:
        """Total SPARC input bits, L*log2(M)."""
        return self.L * self.log_m

    @property
    def length(self) -> int:
        """Length M*L of the message vector."""
        return self.M * self.L

    @property
    def snr(self) -> float:
        return math.inf if self.sigma2 == 0 else self.P / self.sigma2

    @property
    def capacity(self) -> float:
        """AWGN capacity C = 0.5*log2(1 + snr) in bits per real channel use."""
        return math.inf if self.sigma2 == 0 else 0.5 * math.log2(1.0 + self.snr)

    @property
    def sparc_rate(self) -> float:
        return realized_rate(self.L, self.M, self.n)

    def with_noise(self, sigma2: float) -> "CodeParams":
        """Copy with a different noise variance."""
        return CodeParams(L=self.L, M=self.M, n=self.n, R=self.R, P=self.P, sigma2=sigma2)

    def to_dict(self) -> dict:
        """Serialize to dictionary"""
        return {
            "L": self.L,
            "M": self.M,
            "n": self.n,
            "R": self.R,
            "P": self.P,
            "sigma2": self.sigma2,
            "snr": self.snr,
            "capacity": self.capacity,
            "sparc_rate": self.sparc_rate,
        }


@dataclass(frozen=True, eq=False)
class MessageVector:
    """
    Length-ML vector with one non-zero per section of M entries.

    A partial message vector (``partial=True``) may leave sections empty; it is
    used for the LDPC-protected part of the three-stage decoder.
    """
    values: np.ndarray
    L: int
    M: int
    partial: bool = False
    _indices: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        values = frozen_array(self.values)
        if values.ndim != 1 or values.size != self.L * self.M:
            raise DimensionMismatchError("message vector", self.L * self.M, values.shape)
        sections = values.reshape(self.L, self.M)
        nonzeros = np.count_nonzero(sections, axis=1)
        if np.any(nonzeros > 1):
            raise InvalidParameterError("A message vector section holds more than one non-zero")
        if not self.partial and np.any(nonzeros == 0):
            raise InvalidParameterError("A message vector section is empty")
        indices = np.where(nonzeros > 0, np.argmax(sections != 0, axis=1), -1)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_indices", frozen_array(indices, dtype=np.int64))

    @property
    def indices(self) -> np.ndarray:
        """Column index of the non-zero in each section (-1 for an empty section)."""
        return self._indices

    def sections(self) -> np.ndarray:
        """View of the values as an (L, M) array."""
        return self.values.reshape(self.L, self.M)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MessageVector):
            return NotImplemented
        return (self.L, self.M) == (other.L, other.M) and np.array_equal(self.values, other.values)


@dataclass(frozen=True)
class ErrorMetrics:
    """Section, bit and codeword errors of one decode."""
    section_errors: int
    L: int
    bit_errors: int
    n_bits: int

    @property
    def esec(self) -> float:
        return self.section_errors / self.L

    @property
    def eber(self) -> float:
        return self.bit_errors / self.n_bits if self.n_bits else 0.0

    @property
    def cw_error(self) -> bool:
        return self.section_errors > 0

    def to_dict(self) -> dict:
        """Serialize to dictionary"""
        return {
            "section_errors": self.section_errors,
            "bit_errors": self.bit_errors,
            "esec": self.esec,
            "eber": self.eber,
            "cw_error": self.cw_error,
        }


def realized_rate(L: int, M: int, n: int) -> float:
    """L*log2(M)/n for a chosen code length."""
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    return L * (int(M).bit_length() - 1) / n
