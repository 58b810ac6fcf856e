"""
LDPC outer code: systematic encoding, normalized min-sum decoding and a
small-code generator.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.sparse import csr_matrix

from config import settings
from exceptions import DimensionMismatchError, InvalidParameterError, RankDeficientError
from models.code_params import frozen_array
from models.outer_code import ParityCheckMatrix
from utils import gf2

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SystematicEncoder:
    """
    Encoder for the code of ``H``; codewords are [information | parity].

    ``parity_map`` (m x k) gives the parity bits as parity_map @ info mod 2.
    When the original matrix needed reordering, ``H`` is the column-permuted
    matrix and ``H.column_order`` records the permutation.
    """
    H: ParityCheckMatrix
    parity_map: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "parity_map", frozen_array(self.parity_map, dtype=np.uint8))

    @property
    def n(self) -> int:
        return self.H.n

    @property
    def k(self) -> int:
        return self.H.k

    def encode(self, info_bits: np.ndarray) -> np.ndarray:
        """
        Codeword for k information bits.

        Raises:
            DimensionMismatchError: When info_bits is not of length k
        """
        info_bits = np.asarray(info_bits, dtype=np.uint8)
        if info_bits.shape != (self.k,):
            raise DimensionMismatchError("LDPC information bits", self.k, info_bits.shape)
        return np.concatenate([info_bits, gf2.matmul(self.parity_map, info_bits)])


def build_encoder(H: ParityCheckMatrix) -> SystematicEncoder:
    """
    Derive a systematic encoder by GF(2) elimination.

    Pivots are searched from the last column backwards so that the trailing
    m columns hold the parity bits whenever they are independent; otherwise
    the pivot columns are moved to the end.

    Raises:
        RankDeficientError: When H does not have full row rank
    """
    m, n = H.m, H.n
    reduced, pivots = gf2.row_reduce(H.dense(), column_order=range(n - 1, -1, -1))
    if len(pivots) < m:
        raise RankDeficientError(len(pivots), m)

    pivot_set = set(pivots)
    info_columns = [j for j in range(n) if j not in pivot_set]
    # row i of ``reduced`` has its pivot at pivots[i]
    parity_map = reduced[:, info_columns]
    trailing = list(range(n - m, n))
    if sorted(pivots) == trailing:
        row_order = np.argsort(pivots)
        target = H
    else:
        row_order = np.arange(m)
        order = np.array(info_columns + pivots, dtype=np.int64)
        if H.column_order is not None:
            order = H.column_order[order]
        target = ParityCheckMatrix(H=H.H[:, info_columns + pivots], column_order=order)
        logger.info(f"Parity-check matrix columns reordered for systematic encoding ({n} columns)")
    return SystematicEncoder(H=target, parity_map=parity_map[row_order])


def ldpc_encode(encoder: SystematicEncoder, info_bits: np.ndarray) -> np.ndarray:
    """Systematic LDPC codeword [info | parity]."""
    return encoder.encode(info_bits)


class _EdgeGraph:
    """Edges of H sorted by check node."""

    def __init__(self, H: ParityCheckMatrix):
        coo = H.H.tocoo()
        order = np.lexsort((coo.col, coo.row))
        self.checks = coo.row[order].astype(np.int64)
        self.variables = coo.col[order].astype(np.int64)
        self.n = H.n
        edges = self.checks.size
        self.starts = np.flatnonzero(np.r_[True, self.checks[1:] != self.checks[:-1]])
        lengths = np.diff(np.r_[self.starts, edges])
        self.segment = np.repeat(np.arange(self.starts.size), lengths)
        self.positions = np.arange(edges)


def minsum_decode(
    H: ParityCheckMatrix,
    llrs: np.ndarray,
    max_iters: Optional[int] = None,
    scaling: Optional[float] = None,
) -> Tuple[np.ndarray, bool]:
    """
    Normalized min-sum decoding with a flooding schedule.

    Args:
        H: Parity-check matrix
        llrs: Channel LLRs ln(p(0)/p(1)), positive favours bit 0
        max_iters: Iteration cap (settings.minsum_max_iterations by default)
        scaling: Check-node normalization factor (settings.minsum_scaling)

    Returns:
        (bits, valid) where valid means every parity check is satisfied;
        decoding stops as soon as that happens
    """
    max_iters = settings.minsum_max_iterations if max_iters is None else max_iters
    scaling = settings.minsum_scaling if scaling is None else scaling
    llrs = np.asarray(llrs, dtype=float)
    if llrs.shape != (H.n,):
        raise DimensionMismatchError("LDPC LLRs", H.n, llrs.shape)
    if not np.all(np.isfinite(llrs)):
        raise InvalidParameterError("LDPC LLRs must be finite", "Clamp the LLRs before decoding")
    if max_iters < 0:
        raise InvalidParameterError(f"max_iters must be >= 0, got {max_iters}")

    bits = (llrs < 0).astype(np.uint8)
    if H.is_codeword(bits):
        return bits, True

    graph = _EdgeGraph(H)
    seg, starts = graph.segment, graph.starts
    v2c = llrs[graph.variables]
    for iteration in range(max_iters):
        magnitude = np.abs(v2c)
        negative = v2c < 0
        min1 = np.minimum.reduceat(magnitude, starts)
        first = np.minimum.reduceat(
            np.where(magnitude == min1[seg], graph.positions, graph.positions.size), starts
        )
        others = magnitude.copy()
        others[first] = np.inf
        min2 = np.minimum.reduceat(others, starts)
        # degree-one checks send nothing
        min2[np.isinf(min2)] = 0.0
        parity = np.add.reduceat(negative.astype(np.int64), starts) % 2
        sign = np.where(parity[seg] ^ negative, -1.0, 1.0)
        extrinsic = np.where(graph.positions == first[seg], min2[seg], min1[seg])
        c2v = scaling * sign * extrinsic

        totals = llrs + np.bincount(graph.variables, weights=c2v, minlength=graph.n)
        bits = (totals < 0).astype(np.uint8)
        if H.is_codeword(bits):
            logger.debug(f"Min-sum converged after {iteration + 1} iterations")
            return bits, True
        v2c = totals[graph.variables] - c2v

    logger.debug(f"Min-sum did not converge in {max_iters} iterations")
    return bits, False


def generate_regular_ldpc(n: int, k: int, column_weight: int = 3, seed: int = 0) -> ParityCheckMatrix:
    """
    Random LDPC code with a column-regular information part and a
    dual-diagonal parity part, so H always has full row rank.

    Args:
        n: Code length
        k: Information bits
        column_weight: Ones per information column
        seed: Seed of the placement

    Raises:
        InvalidParameterError: Unless n > k >= 1 and column_weight <= n - k
    """
    m = n - k
    if k < 1 or m < 1:
        raise InvalidParameterError(f"Need n > k >= 1, got n={n}, k={k}")
    if not 1 <= column_weight <= m:
        raise InvalidParameterError(f"column_weight must lie in [1, {m}], got {column_weight}")
    rng = np.random.default_rng(seed)
    rows, cols = [], []
    for j in range(k):
        picked = rng.choice(m, size=column_weight, replace=False)
        rows.extend(picked.tolist())
        cols.extend([j] * column_weight)
    for i in range(m):
        rows.append(i)
        cols.append(k + i)
        if i + 1 < m:
            rows.append(i + 1)
            cols.append(k + i)
    H = csr_matrix((np.ones(len(rows), dtype=np.uint8), (rows, cols)), shape=(m, n))
    logger.info(f"Generated ({n}, {k}) LDPC code with information column weight {column_weight}")
    return ParityCheckMatrix(H=H)
