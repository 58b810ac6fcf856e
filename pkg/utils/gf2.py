"""
Linear algebra over GF(2) on dense uint8 arrays.
"""
from typing import List, Optional, Sequence, Tuple

import numpy as np


def row_reduce(matrix, column_order: Optional[Sequence[int]] = None) -> Tuple[np.ndarray, List[int]]:
    """
    Reduced row echelon form over GF(2).

    Args:
        matrix: Binary matrix (anything np.asarray accepts)
        column_order: Order in which columns are tried as pivots
            (left to right by default)

    Returns:
        (reduced, pivots): rows 0..r-1 of ``reduced`` carry the pivots, and
        ``reduced[:, pivots[i]]`` is the i-th unit vector
    """
    A = np.array(matrix, dtype=np.uint8) % 2
    m, n = A.shape
    columns = range(n) if column_order is None else column_order
    pivots: List[int] = []
    r = 0
    for col in columns:
        if r == m:
            break
        candidates = np.flatnonzero(A[r:, col])
        if candidates.size == 0:
            continue
        pivot = r + int(candidates[0])
        if pivot != r:
            A[[r, pivot]] = A[[pivot, r]]
        hits = np.flatnonzero(A[:, col])
        hits = hits[hits != r]
        A[hits] ^= A[r]
        pivots.append(int(col))
        r += 1
    return A, pivots


def rank(matrix) -> int:
    """Rank over GF(2)."""
    return len(row_reduce(matrix)[1])


def matmul(a, b) -> np.ndarray:
    """Matrix (or matrix-vector) product mod 2."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    return ((a @ b) % 2).astype(np.uint8)
