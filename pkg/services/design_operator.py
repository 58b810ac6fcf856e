"""
Design matrix operators.

Both realizations expose ``forward`` (A @ beta) and ``adjoint`` (A.T @ z) and
hold no mutable state after construction, so one operator can be shared by
concurrent decodes. Randomness comes from ``np.random.default_rng(seed)``
(PCG64); the same seed always gives the same operator.
"""
import logging
import math
from abc import ABC, abstractmethod

import numpy as np

from config import settings
from exceptions import DimensionMismatchError, InvalidParameterError, OperatorSizeError
from models.code_params import frozen_array, is_power_of_two
from models.simulation import OperatorKind

logger = logging.getLogger(__name__)

# Largest transform length the Hadamard operator will allocate
MAX_TRANSFORM_SIZE = 1 << 30


def fwht(x: np.ndarray) -> np.ndarray:
    """
    Unnormalized fast Walsh-Hadamard transform along the last axis.

    Output is in natural (Sylvester) order, so for a length-N vector the
    result equals ``scipy.linalg.hadamard(N) @ x``.

    Raises:
        InvalidParameterError: When the last axis is not a power of two
    """
    x = np.array(x, dtype=float, copy=True)
    N = x.shape[-1]
    if not is_power_of_two(N):
        raise InvalidParameterError(f"Transform length must be a power of two, got {N}")
    lead = x.shape[:-1]
    h = 1
    while h < N:
        x = x.reshape(*lead, N // (2 * h), 2, h)
        a = x[..., 0, :]
        b = x[..., 1, :]
        x = np.stack((a + b, a - b), axis=-2)
        h *= 2
    return x.reshape(*lead, N)


def transform_size(n: int, columns: int) -> int:
    """Smallest power of two >= max(n + 1, columns)."""
    need = max(n + 1, columns)
    return 1 << (need - 1).bit_length()


class DesignOperator(ABC):
    """
    The n x ML design matrix A as a linear operator pair.

    Subclasses fill in the products; dimension checks live here.
    """

    kind: OperatorKind

    def __init__(self, n: int, L: int, M: int, seed: int):
        if n < 1 or L < 1 or M < 1:
            raise InvalidParameterError(f"Operator dimensions must be positive, got n={n}, L={L}, M={M}")
        self.n = int(n)
        self.L = int(L)
        self.M = int(M)
        self.seed = int(seed)

    @property
    def columns(self) -> int:
        return self.L * self.M

    def forward(self, beta: np.ndarray) -> np.ndarray:
        """
        A @ beta.

        Raises:
            DimensionMismatchError: When beta is not of length ML
        """
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (self.columns,):
            raise DimensionMismatchError("forward input", self.columns, beta.shape)
        return self._forward(beta)

    def adjoint(self, z: np.ndarray) -> np.ndarray:
        """
        A.T @ z.

        Raises:
            DimensionMismatchError: When z is not of length n
        """
        z = np.asarray(z, dtype=float)
        if z.shape != (self.n,):
            raise DimensionMismatchError("adjoint input", self.n, z.shape)
        return self._adjoint(z)

    def to_dense(self) -> np.ndarray:
        """Materialize A column by column (small instances only)."""
        out = np.empty((self.n, self.columns))
        unit = np.zeros(self.columns)
        for j in range(self.columns):
            unit[j] = 1.0
            out[:, j] = self._forward(unit)
            unit[j] = 0.0
        return out

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "n": self.n, "L": self.L, "M": self.M, "seed": self.seed}

    @abstractmethod
    def _forward(self, beta: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def _adjoint(self, z: np.ndarray) -> np.ndarray:
        ...


class DenseGaussianOperator(DesignOperator):
    """Explicit matrix with i.i.d. N(0, 1/n) entries."""

    kind = OperatorKind.DENSE_GAUSSIAN

    def __init__(self, n: int, L: int, M: int, seed: int):
        super().__init__(n, L, M, seed)
        entries = self.n * self.columns
        if entries > settings.dense_operator_max_entries:
            raise OperatorSizeError(
                f"Dense operator with {entries} entries exceeds the limit of "
                f"{settings.dense_operator_max_entries}"
            )
        rng = np.random.default_rng(self.seed)
        matrix = rng.normal(0.0, 1.0 / math.sqrt(self.n), size=(self.n, self.columns))
        matrix.flags.writeable = False
        self.matrix = matrix

    def _forward(self, beta: np.ndarray) -> np.ndarray:
        return self.matrix @ beta

    def _adjoint(self, z: np.ndarray) -> np.ndarray:
        return self.matrix.T @ z

    def to_dense(self) -> np.ndarray:
        return np.array(self.matrix)


class FastHadamardOperator(DesignOperator):
    """
    A = (1/sqrt(n)) S H_N D.

    D flips the sign of each of the ML input columns, H_N is the N-point
    Walsh-Hadamard transform and S keeps n distinct rows other than row 0.
    Every column has unit norm.
    """

    kind = OperatorKind.FAST_HADAMARD

    def __init__(self, n: int, L: int, M: int, seed: int):
        super().__init__(n, L, M, seed)
        N = transform_size(self.n, self.columns)
        if N > MAX_TRANSFORM_SIZE:
            raise OperatorSizeError(f"Hadamard transform size {N} exceeds {MAX_TRANSFORM_SIZE}")
        rng = np.random.default_rng(self.seed)
        self.N = N
        self.rows = frozen_array(rng.choice(N - 1, size=self.n, replace=False) + 1, dtype=np.int64)
        self.signs = frozen_array(rng.choice(np.array([-1.0, 1.0]), size=self.columns))
        self.scale = 1.0 / math.sqrt(self.n)

    def _forward(self, beta: np.ndarray) -> np.ndarray:
        padded = np.zeros(self.N)
        padded[:self.columns] = self.signs * beta
        return fwht(padded)[self.rows] * self.scale

    def _adjoint(self, z: np.ndarray) -> np.ndarray:
        scattered = np.zeros(self.N)
        scattered[self.rows] = z
        return self.signs * fwht(scattered)[:self.columns] * self.scale

    def to_dict(self) -> dict:
        out = super().to_dict()
        out["transform_size"] = self.N
        return out


_OPERATORS = {
    OperatorKind.DENSE_GAUSSIAN: DenseGaussianOperator,
    OperatorKind.FAST_HADAMARD: FastHadamardOperator,
}


def new_operator(kind: OperatorKind, n: int, L: int, M: int, seed: int) -> DesignOperator:
    """
    Build a design operator; identical arguments give identical operators.

    Args:
        kind: OperatorKind or its string value ("gaussian", "hadamard")
        n: Code length (rows)
        L: Number of sections
        M: Columns per section
        seed: Non-negative integer seed

    Raises:
        InvalidParameterError: On an unknown kind or bad dimensions
        OperatorSizeError: When the operator would be too large
    """
    try:
        kind = OperatorKind(kind)
    except ValueError:
        raise InvalidParameterError(
            f"Unknown operator kind: {kind}",
            f"Use one of {[k.value for k in OperatorKind]}"
        )
    if seed < 0:
        raise InvalidParameterError(f"Operator seed must be non-negative, got {seed}")
    operator = _OPERATORS[kind](n, L, M, seed)
    logger.debug(f"Operator initialized: {operator.to_dict()}")
    return operator
