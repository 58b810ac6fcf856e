"""
Outer-code models: section layout and parity-check matrix.
"""
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np
from scipy.sparse import csr_matrix

from exceptions import DimensionMismatchError, OuterCodeError
from models.code_params import MessageVector, frozen_array
from models.decoder import DecoderState


@dataclass(frozen=True)
class OuterCodeLayout:
    """
    Partition of the L sections around an (n_ldpc, k_ldpc) outer code.

    Sections are ordered unprotected first, then LDPC-protected user bits,
    then parity. All section counts are exact rationals.
    """
    L: int
    M: int
    n_ldpc: int
    k_ldpc: int
    L_user: Fraction
    L_parity: Fraction
    L_protected: Fraction
    L_ldpc: Fraction
    L_unprotected: Fraction

    @property
    def log_m(self) -> int:
        return int(self.M).bit_length() - 1

    @property
    def has_fractional_boundary(self) -> bool:
        """True when one section mixes unprotected and LDPC bits."""
        return self.L_unprotected.denominator != 1

    @property
    def first_ldpc_section(self) -> int:
        """First section holding only LDPC codeword bits."""
        return math.ceil(self.L_unprotected)

    @property
    def user_bits(self) -> int:
        return int(self.L_user * self.log_m)

    @property
    def unprotected_bits(self) -> int:
        return int(self.L_unprotected * self.log_m)

    @property
    def total_bits(self) -> int:
        return self.L * self.log_m

    def unprotected_mask(self) -> np.ndarray:
        """Boolean mask over the L sections decoded by the final AMP pass."""
        mask = np.zeros(self.L, dtype=bool)
        mask[:self.first_ldpc_section] = True
        return mask

    def to_dict(self) -> dict:
        """Serialize to dictionary (fractions as floats plus exact strings)"""
        out = {"L": self.L, "M": self.M, "n_ldpc": self.n_ldpc, "k_ldpc": self.k_ldpc}
        for name in ("L_user", "L_parity", "L_protected", "L_ldpc", "L_unprotected"):
            value = getattr(self, name)
            out[name] = float(value)
            out[f"{name}_exact"] = str(value)
        out["fractional_boundary"] = self.has_fractional_boundary
        return out


@dataclass(frozen=True, eq=False)
class ParityCheckMatrix:
    """
    Sparse binary parity-check matrix with variable/check adjacency.

    When the matrix was column-permuted for systematic encoding,
    ``column_order[i]`` is the original column placed at position i.
    """
    H: csr_matrix
    column_order: Optional[np.ndarray] = None
    check_nodes: Tuple[np.ndarray, ...] = field(init=False, repr=False)
    var_nodes: Tuple[np.ndarray, ...] = field(init=False, repr=False)

    def __post_init__(self):
        H = csr_matrix(self.H, dtype=np.uint8, copy=True)
        H.sum_duplicates()
        H.data %= 2
        H.eliminate_zeros()
        m, n = H.shape
        if m < 1 or n <= m:
            raise DimensionMismatchError("parity-check matrix", "m < n", H.shape)
        column_weights = np.asarray(H.sum(axis=0)).ravel()
        if np.any(column_weights == 0):
            raise OuterCodeError(
                f"Parity-check matrix has {int(np.sum(column_weights == 0))} empty columns",
                "Every code bit must take part in at least one check"
            )
        csc = H.tocsc()
        checks = tuple(H.indices[H.indptr[i]:H.indptr[i + 1]].copy() for i in range(m))
        variables = tuple(csc.indices[csc.indptr[j]:csc.indptr[j + 1]].copy() for j in range(n))
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "check_nodes", checks)
        object.__setattr__(self, "var_nodes", variables)
        if self.column_order is not None:
            order = frozen_array(self.column_order, dtype=np.int64)
            if sorted(order.tolist()) != list(range(n)):
                raise OuterCodeError("column_order is not a permutation of the code columns")
            object.__setattr__(self, "column_order", order)

    @property
    def n(self) -> int:
        return int(self.H.shape[1])

    @property
    def m(self) -> int:
        return int(self.H.shape[0])

    @property
    def k(self) -> int:
        """Nominal dimension n - m."""
        return self.n - self.m

    def syndrome(self, bits: np.ndarray) -> np.ndarray:
        """H * bits over GF(2)."""
        bits = np.asarray(bits, dtype=np.int64)
        if bits.shape != (self.n,):
            raise DimensionMismatchError("codeword", self.n, bits.shape)
        return np.asarray(self.H @ bits).ravel() % 2

    def is_codeword(self, bits: np.ndarray) -> bool:
        return not np.any(self.syndrome(bits))

    def dense(self) -> np.ndarray:
        return self.H.toarray().astype(np.uint8)


@dataclass(frozen=True)
class ThreeStageResult:
    """
    Outcome of the three-stage decoder.

    ``user_bits`` are the decoded unprotected plus LDPC information bits and
    ``beta_hat`` the final message vector. When the LDPC decoder fails the
    first-stage hard decision is returned and ``fallback`` is set.
    """
    user_bits: np.ndarray
    beta_hat: MessageVector
    ldpc_valid: bool
    fallback: bool
    first_stage: DecoderState
    final_stage: Optional[DecoderState] = None

    def __post_init__(self):
        object.__setattr__(self, "user_bits", frozen_array(self.user_bits, dtype=np.uint8))

    @property
    def iterations_run(self) -> int:
        extra = self.final_stage.iterations_run if self.final_stage is not None else 0
        return self.first_stage.iterations_run + extra

    @property
    def tau2_final(self) -> float:
        stage = self.final_stage if self.final_stage is not None else self.first_stage
        return stage.tau2_final

    def diagnostics(self) -> dict:
        """Per-stage summary stored with trial records."""
        return {
            "ldpc_valid": self.ldpc_valid,
            "fallback": self.fallback,
            "first_stage": self.first_stage.to_dict(),
            "final_stage": self.final_stage.to_dict() if self.final_stage is not None else None,
        }
