"""
Code length, Eb/N0 conversion, bit <-> message mapping and error measurement.

Bit chunks map to column indices big-endian: chunk l of log2(M) bits, read
most significant bit first, is the 0-based column of the non-zero in section l.
"""
import logging
import math
from typing import Tuple

import numpy as np

from exceptions import DimensionMismatchError, InvalidParameterError
from models.code_params import CodeParams, ErrorMetrics, MessageVector, is_power_of_two, realized_rate
from models.power_allocation import PowerAllocation

logger = logging.getLogger(__name__)


def derive_code_length(L: int, M: int, R: float) -> Tuple[int, float]:
    """
    Code length for a nominal rate.

    Args:
        L: Number of sections
        M: Columns per section (power of two)
        R: Rate in bits per real channel use

    Returns:
        (n, realized rate L*log2(M)/n) with n = round(L*log2(M)/R)

    Raises:
        InvalidParameterError: On R <= 0, L < 1 or non-power-of-two M
    """
    if L < 1:
        raise InvalidParameterError(f"L must be >= 1, got {L}")
    if not is_power_of_two(M):
        raise InvalidParameterError(f"M must be a power of two, got {M}")
    if not R > 0:
        raise InvalidParameterError(f"R must be > 0, got {R}")
    bits = L * (int(M).bit_length() - 1)
    n = max(1, int(round(bits / R)))
    return n, realized_rate(L, M, n)


def make_code_params(L: int, M: int, R: float, P: float, sigma2: float) -> CodeParams:
    """CodeParams with n derived from the nominal rate."""
    n, rate = derive_code_length(L, M, R)
    if abs(rate - R) > 1e-6 * R:
        logger.debug(f"Realized rate {rate:.6f} differs from nominal R={R} (n={n})")
    return CodeParams(L=L, M=M, n=n, R=R, P=P, sigma2=sigma2)


def ebn0_to_snr(ebn0_db: float, R: float) -> float:
    """
    snr = P/sigma2 = 2 R Eb/N0.

    Raises:
        InvalidParameterError: On R <= 0
    """
    if not R > 0:
        raise InvalidParameterError(f"R must be > 0, got {R}")
    return 2.0 * R * 10.0 ** (ebn0_db / 10.0)


def snr_to_ebn0(snr: float, R: float) -> float:
    """Inverse of ebn0_to_snr, in dB."""
    if not R > 0 or not snr > 0:
        raise InvalidParameterError("snr and R must be > 0")
    return 10.0 * math.log10(snr / (2.0 * R))


def bits_to_indices(bits: np.ndarray, M: int) -> np.ndarray:
    """Big-endian decode of consecutive log2(M)-bit chunks."""
    log_m = int(M).bit_length() - 1
    bits = np.asarray(bits, dtype=np.int64)
    if log_m == 0:
        return np.zeros(0, dtype=np.int64)
    chunks = bits.reshape(-1, log_m)
    weights = 1 << np.arange(log_m, dtype=np.int64)[::-1]
    return chunks.dot(weights)


def indices_to_bits(indices: np.ndarray, M: int) -> np.ndarray:
    """Big-endian encode of column indices into log2(M)-bit chunks."""
    log_m = int(M).bit_length() - 1
    indices = np.asarray(indices, dtype=np.int64)
    shifts = np.arange(log_m, dtype=np.int64)[::-1]
    return ((indices[:, None] >> shifts[None, :]) & 1).astype(np.uint8).ravel()


def bits_to_message(bits: np.ndarray, pa: PowerAllocation, params: CodeParams) -> MessageVector:
    """
    Map L*log2(M) bits to a message vector.

    Raises:
        DimensionMismatchError: When the bit count or allocation length is wrong
    """
    bits = np.asarray(bits)
    if bits.ndim != 1 or bits.size != params.message_bits:
        raise DimensionMismatchError("message bits", params.message_bits, bits.shape)
    if pa.L != params.L:
        raise DimensionMismatchError("power allocation", params.L, pa.L)
    if np.any((bits != 0) & (bits != 1)):
        raise InvalidParameterError("Message bits must be 0 or 1")
    if params.log_m == 0:
        indices = np.zeros(params.L, dtype=np.int64)
    else:
        indices = bits_to_indices(bits, params.M)
    values = np.zeros(params.length)
    values[np.arange(params.L) * params.M + indices] = pa.amplitudes(params.n)
    return MessageVector(values=values, L=params.L, M=params.M)


def message_to_bits(beta: MessageVector) -> np.ndarray:
    """Inverse of bits_to_message (empty sections read as index 0)."""
    return indices_to_bits(np.maximum(beta.indices, 0), beta.M)


def measure_errors(
    beta_hat: MessageVector,
    beta_true: MessageVector,
    bits_hat: np.ndarray,
    bits_true: np.ndarray,
) -> ErrorMetrics:
    """
    Section errors from non-zero positions, bit errors by exact comparison.

    Raises:
        DimensionMismatchError: When the inputs disagree in shape
    """
    if (beta_hat.L, beta_hat.M) != (beta_true.L, beta_true.M):
        raise DimensionMismatchError("message vector", (beta_true.L, beta_true.M), (beta_hat.L, beta_hat.M))
    bits_hat = np.asarray(bits_hat)
    bits_true = np.asarray(bits_true)
    if bits_hat.shape != bits_true.shape:
        raise DimensionMismatchError("bit sequence", bits_true.shape, bits_hat.shape)
    section_errors = int(np.count_nonzero(beta_hat.indices != beta_true.indices))
    bit_errors = int(np.count_nonzero(bits_hat != bits_true))
    return ErrorMetrics(
        section_errors=section_errors,
        L=beta_true.L,
        bit_errors=bit_errors,
        n_bits=int(bits_true.size),
    )


def random_bits(count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform i.i.d. message bits."""
    return rng.integers(0, 2, size=count, dtype=np.uint8)
