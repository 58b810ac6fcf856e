"""
Reading and writing parity-check matrices in the alist format.

Layout (1-based indices, zero padding allowed):

    n m
    max_column_degree max_row_degree
    column degrees (n values)
    row degrees (m values)
    n lines: check indices of each column
    m lines: variable indices of each row
"""
import logging
from pathlib import Path
from typing import List, Union

import numpy as np
from scipy.sparse import csr_matrix

from exceptions import AlistFormatError
from models.outer_code import ParityCheckMatrix

logger = logging.getLogger(__name__)


def _parse_ints(path: str, line: str, number: int) -> List[int]:
    try:
        return [int(token) for token in line.split()]
    except ValueError:
        raise AlistFormatError(path, f"line {number} holds a non-integer entry")


def read_alist(path: Union[str, Path]) -> ParityCheckMatrix:
    """
    Load a parity-check matrix from an alist file.

    The column lists define H; row lists, when present, must agree with them.

    Raises:
        AlistFormatError: When the file is truncated or inconsistent
    """
    path = str(path)
    try:
        with open(path, "r") as f:
            lines = [line.strip() for line in f if line.strip()]
    except OSError as e:
        raise AlistFormatError(path, f"cannot be read ({e})")

    if len(lines) < 4:
        raise AlistFormatError(path, "missing header lines")
    header = _parse_ints(path, lines[0], 1)
    if len(header) != 2 or min(header) < 1:
        raise AlistFormatError(path, "first line must hold 'n m' with positive values")
    n, m = header
    column_degrees = _parse_ints(path, lines[2], 3)
    row_degrees = _parse_ints(path, lines[3], 4)
    if len(column_degrees) != n or len(row_degrees) != m:
        raise AlistFormatError(path, "degree lists do not match the declared dimensions")
    if len(lines) < 4 + n:
        raise AlistFormatError(path, f"expected {n} column lines, found {len(lines) - 4}")

    rows, cols = [], []
    for j in range(n):
        entries = [e for e in _parse_ints(path, lines[4 + j], 5 + j) if e > 0]
        if len(entries) != column_degrees[j]:
            raise AlistFormatError(path, f"column {j + 1} lists {len(entries)} checks, degree says {column_degrees[j]}")
        if any(e > m for e in entries):
            raise AlistFormatError(path, f"column {j + 1} refers to a check beyond {m}")
        rows.extend(e - 1 for e in entries)
        cols.extend([j] * len(entries))

    H = csr_matrix((np.ones(len(rows), dtype=np.uint8), (rows, cols)), shape=(m, n))

    if len(lines) >= 4 + n + m:
        for i in range(m):
            entries = sorted(e - 1 for e in _parse_ints(path, lines[4 + n + i], 5 + n + i) if e > 0)
            if entries != sorted(H.indices[H.indptr[i]:H.indptr[i + 1]].tolist()):
                raise AlistFormatError(path, f"row {i + 1} disagrees with the column lists")
    else:
        logger.debug(f"{path}: no row lists, using column lists only")

    return ParityCheckMatrix(H=H)


def write_alist(H: Union[ParityCheckMatrix, np.ndarray, csr_matrix], path: Union[str, Path]) -> None:
    """Write a parity-check matrix in alist format."""
    matrix = H.H if isinstance(H, ParityCheckMatrix) else csr_matrix(H)
    matrix = csr_matrix(matrix, dtype=np.uint8)
    csc = matrix.tocsc()
    m, n = matrix.shape
    col_lists = [sorted(csc.indices[csc.indptr[j]:csc.indptr[j + 1]].tolist()) for j in range(n)]
    row_lists = [sorted(matrix.indices[matrix.indptr[i]:matrix.indptr[i + 1]].tolist()) for i in range(m)]
    max_col = max(len(c) for c in col_lists)
    max_row = max(len(r) for r in row_lists)

    def padded(entries: List[int], width: int) -> str:
        values = [e + 1 for e in entries] + [0] * (width - len(entries))
        return " ".join(str(v) for v in values)

    with open(path, "w") as f:
        f.write(f"{n} {m}\n")
        f.write(f"{max_col} {max_row}\n")
        f.write(" ".join(str(len(c)) for c in col_lists) + "\n")
        f.write(" ".join(str(len(r)) for r in row_lists) + "\n")
        for entries in col_lists:
            f.write(padded(entries, max_col) + "\n")
        for entries in row_lists:
            f.write(padded(entries, max_row) + "\n")
    logger.info(f"Wrote {m}x{n} parity-check matrix to {path}")
