"""
SPARC with a partial LDPC outer code.

The L*log2(M) SPARC input bits are laid out as

    [ unprotected user bits | LDPC information bits | LDPC parity bits ]

so the LDPC codeword fills the last n_ldpc bits. When n_ldpc is not a
multiple of log2(M) one boundary section carries both unprotected and LDPC
bits; it is treated as unprotected by the final AMP pass.

Decoding runs AMP on everything, turns the sections holding codeword bits
into bit LLRs, decodes the LDPC code, cancels the protected sections from y
and runs AMP again on the unprotected sections only.
"""
import logging
from dataclasses import replace
from fractions import Fraction
from typing import Optional, Tuple, Union

import numpy as np

from config import settings
from exceptions import DimensionMismatchError, InvalidParameterError, LayoutError
from models.code_params import CodeParams, MessageVector
from models.decoder import DecoderConfig, DecoderState, TauMode
from models.outer_code import OuterCodeLayout, ParityCheckMatrix, ThreeStageResult
from models.power_allocation import PowerAllocation
from services.amp_decoder import amp_decode, hard_decision
from services.core import bits_to_indices, bits_to_message, message_to_bits
from services.design_operator import DesignOperator
from services.ldpc import SystematicEncoder, build_encoder, minsum_decode

logger = logging.getLogger(__name__)


def plan_layout(L: int, M: int, n_ldpc: int, k_ldpc: int) -> OuterCodeLayout:
    """
    Exact section counts for an (n_ldpc, k_ldpc) outer code inside L sections.

    Raises:
        InvalidParameterError: Unless n_ldpc > k_ldpc >= 1 and M >= 2
        LayoutError: When the LDPC codeword needs more than L sections
    """
    if not n_ldpc > k_ldpc >= 1:
        raise InvalidParameterError(f"Need n_ldpc > k_ldpc >= 1, got ({n_ldpc}, {k_ldpc})")
    if M < 2 or M & (M - 1):
        raise InvalidParameterError(f"M must be a power of two >= 2, got {M}")
    log_m = M.bit_length() - 1
    L_parity = Fraction(n_ldpc - k_ldpc, log_m)
    L_protected = Fraction(k_ldpc, log_m)
    L_ldpc = L_protected + L_parity
    if L_ldpc > L:
        raise LayoutError(f"LDPC codeword needs {float(L_ldpc):.3f} sections, only {L} available")
    L_user = L - L_parity
    return OuterCodeLayout(
        L=L,
        M=M,
        n_ldpc=n_ldpc,
        k_ldpc=k_ldpc,
        L_user=L_user,
        L_parity=L_parity,
        L_protected=L_protected,
        L_ldpc=L_ldpc,
        L_unprotected=L_user - L_protected,
    )


def _bit_masks(M: int) -> np.ndarray:
    """(M, log2 M) table; column b is bit b (MSB first) of each index."""
    log_m = M.bit_length() - 1
    shifts = np.arange(log_m)[::-1]
    return ((np.arange(M)[:, None] >> shifts[None, :]) & 1).astype(float)


def section_to_bit_posteriors(beta_section: np.ndarray) -> np.ndarray:
    """
    P(bit b of the column index is 1) from one section of non-negative weights.

    Bit 0 is the most significant. An all-zero section gives 0.5 everywhere.
    """
    return sections_to_bit_posteriors(np.asarray(beta_section, dtype=float)[None, :])[0]


def sections_to_bit_posteriors(sections: np.ndarray) -> np.ndarray:
    """Row-wise section_to_bit_posteriors for an (L, M) array."""
    sections = np.asarray(sections, dtype=float)
    M = sections.shape[1]
    if M < 2 or M & (M - 1):
        raise InvalidParameterError(f"Section length must be a power of two >= 2, got {M}")
    if np.any(sections < 0):
        raise InvalidParameterError("Section weights must be non-negative")
    totals = sections.sum(axis=1, keepdims=True)
    mass = sections @ _bit_masks(M)
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = np.where(totals > 0, mass / np.where(totals > 0, totals, 1.0), 0.5)
    return np.clip(probs, 0.0, 1.0)


def posteriors_to_llrs(probs: np.ndarray, clamp: Optional[float] = None) -> np.ndarray:
    """ln((1 - p) / p), clamped to +-clamp (settings.llr_clamp by default)."""
    clamp = settings.llr_clamp if clamp is None else clamp
    probs = np.asarray(probs, dtype=float)
    with np.errstate(divide="ignore"):
        llrs = np.log1p(-probs) - np.log(probs)
    return np.clip(llrs, -clamp, clamp)


def outer_encode(user_bits: np.ndarray, encoder: SystematicEncoder, layout: OuterCodeLayout) -> np.ndarray:
    """
    SPARC input bits for the user bits: unprotected bits, then the codeword.

    Raises:
        DimensionMismatchError: When the bit count does not match the layout
    """
    user_bits = np.asarray(user_bits, dtype=np.uint8)
    if user_bits.shape != (layout.user_bits,):
        raise DimensionMismatchError("user bits", layout.user_bits, user_bits.shape)
    split = layout.unprotected_bits
    return np.concatenate([user_bits[:split], encoder.encode(user_bits[split:])])


def build_beta_ldpc(
    codeword: np.ndarray,
    layout: OuterCodeLayout,
    pa: PowerAllocation,
    n: int,
) -> MessageVector:
    """
    Partial message vector holding the sections made entirely of codeword bits.

    Earlier sections, the fractional boundary section included, stay empty.
    """
    codeword = np.asarray(codeword, dtype=np.uint8)
    if codeword.shape != (layout.n_ldpc,):
        raise DimensionMismatchError("LDPC codeword", layout.n_ldpc, codeword.shape)
    first = layout.first_ldpc_section
    log_m = layout.log_m
    offset = first * log_m - layout.unprotected_bits
    indices = bits_to_indices(codeword[offset:], layout.M)
    values = np.zeros((layout.L, layout.M))
    sections = np.arange(first, layout.L)
    values[sections, indices] = pa.amplitudes(n)[first:]
    return MessageVector(values=values.ravel(), L=layout.L, M=layout.M, partial=True)


class ThreeStageDecoder:
    """
    AMP, then min-sum on the protected part, then AMP on the unprotected part.

    The parity-check matrix is brought into systematic form on construction;
    use ``self.encoder`` to encode so transmitter and receiver agree on the
    column order.
    """

    def __init__(
        self,
        H: Union[ParityCheckMatrix, SystematicEncoder],
        params: CodeParams,
        pa: PowerAllocation,
        cfg: Optional[DecoderConfig] = None,
        minsum_iterations: Optional[int] = None,
        minsum_scaling: Optional[float] = None,
        llr_clamp: Optional[float] = None,
    ):
        self.encoder = H if isinstance(H, SystematicEncoder) else build_encoder(H)
        self.H = self.encoder.H
        self.layout = plan_layout(params.L, params.M, self.H.n, self.H.k)
        if pa.L != params.L:
            raise DimensionMismatchError("power allocation", params.L, pa.L)
        self.params = params
        self.pa = pa
        self.cfg = cfg or DecoderConfig.from_settings()
        self.minsum_iterations = minsum_iterations or settings.minsum_max_iterations
        self.minsum_scaling = settings.minsum_scaling if minsum_scaling is None else minsum_scaling
        self.llr_clamp = settings.llr_clamp if llr_clamp is None else llr_clamp
        logger.info(
            f"ThreeStageDecoder initialized with ({self.H.n}, {self.H.k}) LDPC code, "
            f"L={params.L}, M={params.M}, unprotected sections={float(self.layout.L_unprotected):.3f}"
        )

    def run_first_stage(self, y: np.ndarray, op: DesignOperator) -> DecoderState:
        """AMP over all L sections."""
        return amp_decode(y, op, self.pa, self.params, self.cfg)

    def decode_outer(self, state: DecoderState) -> Tuple[np.ndarray, bool]:
        """
        Min-sum decode of the codeword bits read off the first-stage estimate.

        Returns:
            (codeword, valid)
        """
        probs = sections_to_bit_posteriors(state.beta.reshape(self.params.L, self.params.M)).ravel()
        llrs = posteriors_to_llrs(probs[self.layout.unprotected_bits:], self.llr_clamp)
        return minsum_decode(self.H, llrs, self.minsum_iterations, self.minsum_scaling)

    def run_second_stage(self, y: np.ndarray, op: DesignOperator, codeword: np.ndarray) -> DecoderState:
        """AMP on the unprotected sections after cancelling the decoded codeword sections."""
        beta_ldpc = build_beta_ldpc(codeword, self.layout, self.pa, self.params.n)
        residual = np.asarray(y, dtype=float) - op.forward(beta_ldpc.values)
        # offline schedules assume every section is being decoded
        cfg = replace(self.cfg, tau_mode=TauMode.ONLINE)
        return amp_decode(residual, op, self.pa, self.params, cfg, section_mask=self.layout.unprotected_mask())

    def decode(self, y: np.ndarray, op: DesignOperator) -> ThreeStageResult:
        """
        Full three-stage decode.

        Returns:
            ThreeStageResult; on LDPC failure the first-stage hard decision
        """
        first = self.run_first_stage(y, op)
        codeword, valid = self.decode_outer(first)
        n, split = self.params.n, self.layout.unprotected_bits

        if not valid:
            logger.warning("LDPC decoding failed; returning the first-stage hard decision")
            beta_hat = hard_decision(first, self.pa, n)
            bits = message_to_bits(beta_hat)
            return ThreeStageResult(
                user_bits=bits[:self.layout.user_bits],
                beta_hat=beta_hat,
                ldpc_valid=False,
                fallback=True,
                first_stage=first,
            )

        final = self.run_second_stage(y, op, codeword)
        unprotected = message_to_bits(hard_decision(final, self.pa, n))[:split]
        bits = np.concatenate([unprotected, codeword])
        beta_hat = bits_to_message(bits, self.pa, self.params)
        return ThreeStageResult(
            user_bits=bits[:self.layout.user_bits],
            beta_hat=beta_hat,
            ldpc_valid=True,
            fallback=False,
            first_stage=first,
            final_stage=final,
        )


def three_stage_decode(
    y: np.ndarray,
    op: DesignOperator,
    pa: PowerAllocation,
    params: CodeParams,
    H: ParityCheckMatrix,
    cfg: Optional[DecoderConfig] = None,
) -> ThreeStageResult:
    """Functional wrapper around ThreeStageDecoder.decode."""
    return ThreeStageDecoder(H, params, pa, cfg).decode(y, op)
