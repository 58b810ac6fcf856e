"""
SPARC encoder and AMP decoder.

The decoder alternates

    z^t     = y - A beta^t + (z^{t-1} / tau2_{t-1}) (P - ||beta^t||^2 / n)
    tau2_t  = ||z^t||^2 / n
    beta^{t+1} = denoise(beta^t + A^T z^t, tau2_t)

with no Onsager correction at t = 0 and beta^0 = 0.
"""
import logging
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.special import softmax

from config import settings
from exceptions import DecoderDivergenceError, DimensionMismatchError, InvalidParameterError
from models.code_params import CodeParams, MessageVector
from models.decoder import DecoderConfig, DecoderState, TauMode, Termination
from models.power_allocation import PowerAllocation
from services.design_operator import DesignOperator

logger = logging.getLogger(__name__)

# Called after each iteration with (t, s^t, tau2_t)
IterationCallback = Callable[[int, np.ndarray, float], None]


def encode(beta: Union[MessageVector, np.ndarray], op: DesignOperator) -> np.ndarray:
    """
    Codeword x = A beta.

    Raises:
        DimensionMismatchError: When beta does not match the operator
    """
    values = beta.values if isinstance(beta, MessageVector) else np.asarray(beta, dtype=float)
    return op.forward(values)


def denoise(
    s: np.ndarray,
    tau2: float,
    pa: PowerAllocation,
    n: int,
    section_mask: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Section-wise posterior mean of beta given s = beta + sqrt(tau2) * noise.

    Section l becomes sqrt(n P_l) * softmax(s_l * sqrt(n P_l) / tau2).
    Sections outside ``section_mask`` are set to zero.

    Raises:
        InvalidParameterError: On tau2 <= 0
    """
    if not tau2 > 0:
        raise InvalidParameterError(f"tau2 must be > 0, got {tau2}")
    L = pa.L
    s = np.asarray(s, dtype=float)
    if s.size % L:
        raise DimensionMismatchError("denoiser input", f"multiple of L={L}", s.shape)
    amplitudes = pa.amplitudes(n)[:, None]
    weights = softmax(s.reshape(L, -1) * (amplitudes / tau2), axis=1)
    out = amplitudes * weights
    if section_mask is not None:
        out[~np.asarray(section_mask, dtype=bool)] = 0.0
    return out.ravel()


def amp_decode(
    y: np.ndarray,
    op: DesignOperator,
    pa: PowerAllocation,
    params: CodeParams,
    cfg: Optional[DecoderConfig] = None,
    section_mask: Optional[np.ndarray] = None,
    tau2_schedule: Optional[Sequence[float]] = None,
    on_iteration: Optional[IterationCallback] = None,
) -> DecoderState:
    """
    Run AMP on a received vector.

    Args:
        y: Received vector of length n
        op: Design operator used to encode
        pa: Power allocation of the transmitted message
        params: Code parameters
        cfg: Decoder configuration (settings defaults when omitted)
        section_mask: Decode only these sections; the others are treated as
            already cancelled from y and stay zero
        tau2_schedule: Offline tau2 values for TauMode.OFFLINE_SE; computed
            from asymptotic state evolution when omitted
        on_iteration: Optional per-iteration hook

    Returns:
        DecoderState holding beta^T

    Raises:
        DimensionMismatchError: On inconsistent dimensions
        DecoderDivergenceError: When an iterate becomes non-finite
    """
    cfg = cfg or DecoderConfig.from_settings()
    y = np.asarray(y, dtype=float)
    n = params.n
    if y.shape != (n,):
        raise DimensionMismatchError("received vector", n, y.shape)
    if (op.n, op.L, op.M) != (n, params.L, params.M):
        raise DimensionMismatchError("design operator", (n, params.L, params.M), (op.n, op.L, op.M))
    if pa.L != params.L:
        raise DimensionMismatchError("power allocation", params.L, pa.L)

    if section_mask is not None:
        section_mask = np.asarray(section_mask, dtype=bool)
        if section_mask.shape != (params.L,):
            raise DimensionMismatchError("section mask", params.L, section_mask.shape)
        power = float(pa.powers[section_mask].sum())
    else:
        power = pa.P

    schedule = None
    if cfg.tau_mode is TauMode.OFFLINE_SE:
        schedule = _offline_schedule(pa, params, tau2_schedule)

    threshold = cfg.resolve_threshold(pa.smallest)
    floor = np.finfo(float).eps * pa.P
    beta = np.zeros(params.length)
    z_prev = None
    tau2_prev = None
    trace = []
    termination = Termination.MAX_ITERATIONS
    iterations = cfg.max_iterations

    for t in range(cfg.max_iterations):
        z = y - op.forward(beta)
        if t > 0:
            z = z + (z_prev / tau2_prev) * (power - beta.dot(beta) / n)
        if not np.all(np.isfinite(z)):
            raise DecoderDivergenceError(t, "residual")

        if schedule is not None:
            tau2 = float(schedule[min(t, len(schedule) - 1)])
        else:
            tau2 = max(float(z.dot(z)) / n, floor)
        trace.append(tau2)

        s = beta + op.adjoint(z)
        beta = denoise(s, tau2, pa, n, section_mask)
        if not np.all(np.isfinite(beta)):
            raise DecoderDivergenceError(t, "estimate")
        if on_iteration is not None:
            on_iteration(t, s, tau2)
        logger.debug(f"AMP iteration {t}: tau2={tau2:.6g}")

        if t >= 1 and threshold > 0 and abs(tau2 - tau2_prev) < threshold:
            termination = Termination.CONVERGED
            iterations = t + 1
            break
        z_prev, tau2_prev = z, tau2

    return DecoderState(
        beta=beta,
        z=z,
        tau2_trace=tuple(trace),
        iterations_run=iterations,
        termination=termination,
        section_mask=section_mask,
    )


def _offline_schedule(
    pa: PowerAllocation,
    params: CodeParams,
    tau2_schedule: Optional[Sequence[float]],
) -> np.ndarray:
    if tau2_schedule is None:
        from services.state_evolution import se_trajectory

        tau2_schedule = se_trajectory(pa, params).tau2_seq
    schedule = np.asarray(tau2_schedule, dtype=float)
    if schedule.ndim != 1 or schedule.size < 1 or np.any(schedule <= 0):
        raise InvalidParameterError("An offline tau2 schedule needs at least one positive value")
    return schedule


def hard_decision(
    state: Union[DecoderState, np.ndarray],
    pa: PowerAllocation,
    n: int,
) -> MessageVector:
    """
    Keep the largest entry of each section at sqrt(n P_l), zero the rest.

    Ties go to the lowest index.
    """
    beta = state.beta if isinstance(state, DecoderState) else np.asarray(state, dtype=float)
    L = pa.L
    sections = beta.reshape(L, -1)
    M = sections.shape[1]
    winners = np.argmax(sections, axis=1)
    values = np.zeros((L, M))
    values[np.arange(L), winners] = pa.amplitudes(n)
    return MessageVector(values=values.ravel(), L=L, M=M, partial=bool(np.any(pa.powers == 0)))


def estimate_remaining_errors(
    state: DecoderState,
    pa: PowerAllocation,
    sigma2: float,
    n: int,
    slack: Optional[float] = None,
) -> int:
    """
    Runtime estimate of the number of wrongly decoded sections.

    tau2_T - sigma2 estimates the power left undecoded. The estimate is the
    largest k whose k smallest section powers fit into that power times
    (1 + slack). ``slack`` defaults to remaining_error_slack * P_L.
    """
    excess = state.tau2_final - sigma2
    if excess <= 0:
        return 0
    if slack is None:
        slack = settings.remaining_error_slack * pa.smallest
    budget = excess * (1.0 + slack)
    smallest_first = np.cumsum(np.sort(pa.powers))
    return int(np.searchsorted(smallest_first, budget + 1e-12 * pa.P, side="right"))
