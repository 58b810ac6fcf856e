"""
State evolution and error-rate prediction.

State evolution tracks tau2_t, the variance of the effective observation
s^t = beta + tau_t * Z seen by the denoiser:

    tau2_0     = sigma2 + P
    tau2_{t+1} = sigma2 + P (1 - x(tau_t))

x(tau) is the power-weighted fraction of sections decoded at noise level
tau, either from the large-system indicator or estimated by Monte Carlo.
"""
import logging
import math
from typing import Optional

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import log_ndtr, logsumexp

from config import settings
from exceptions import InvalidParameterError, QuadratureError
from models.analysis import ErrorPrediction, MonteCarloEstimate, SEMode, SETrajectory
from models.code_params import CodeParams
from models.power_allocation import PowerAllocation

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)

# Sections sitting exactly on the decoding threshold count as decoded
_THRESHOLD_RTOL = 1e-9

# Monte-Carlo rows drawn at a time
_CHUNK = 2048

# Largest change allowed between quadrature orders q and 2q before the fine
# trapezoid rule takes over
_QUAD_TOL = 1e-9


def se_x_asymptotic(tau2: float, pa: PowerAllocation, R: float) -> float:
    """
    Large-system x(tau): power fraction of sections with L*P_l > 2 R tau2 ln2.

    Raises:
        InvalidParameterError: On tau2 <= 0
    """
    if not tau2 > 0:
        raise InvalidParameterError(f"tau2 must be > 0, got {tau2}")
    threshold = 2.0 * R * tau2 * LN2
    decoded = pa.L * pa.powers > threshold * (1.0 - _THRESHOLD_RTOL)
    return float(pa.powers[decoded].sum() / pa.P)


def _expected_weights(
    c: np.ndarray,
    M: int,
    samples: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Per-sample softmax weight on the true column for each amplitude ratio.

    Returns:
        Array of shape (samples, len(c)); entry [i, j] is the weight the
        denoiser puts on the transmitted column with ratio c[j], sample i.
    """
    out = np.empty((samples, c.size))
    start = 0
    while start < samples:
        rows = min(_CHUNK, samples - start)
        u = rng.standard_normal((rows, M))
        for j, ratio in enumerate(c):
            logits = ratio * u
            logits[:, 0] += ratio * ratio
            out[start:start + rows, j] = np.exp(logits[:, 0] - logsumexp(logits, axis=1))
        start += rows
    return out


def se_x_montecarlo(
    tau: float,
    pa: PowerAllocation,
    n: int,
    M: int,
    samples: Optional[int] = None,
    seed: Optional[int] = 0,
) -> MonteCarloEstimate:
    """
    Monte-Carlo x(tau): sum_l (P_l/P) E[softmax weight on the true column].

    Sections with equal power share one estimate; all of them reuse the same
    normal draws, so identical seeds give identical results.

    Args:
        tau: Effective noise standard deviation
        pa: Power allocation
        n: Code length
        M: Columns per section
        samples: Number of Monte-Carlo samples (settings.mc_samples by default)
        seed: Seed of the normal draws

    Returns:
        MonteCarloEstimate with the standard error of the mean
    """
    samples = settings.mc_samples if samples is None else samples
    if samples < 1:
        raise InvalidParameterError(f"samples must be >= 1, got {samples}")
    if not tau > 0:
        raise InvalidParameterError(f"tau must be > 0, got {tau}")
    if M < 1:
        raise InvalidParameterError(f"M must be >= 1, got {M}")
    unique, inverse = np.unique(pa.powers, return_inverse=True)
    share = np.bincount(inverse, weights=pa.powers) / pa.P
    c = np.sqrt(n * unique) / tau
    weights = _expected_weights(c, M, samples, np.random.default_rng(seed))
    per_sample = weights @ share
    std_error = float(per_sample.std(ddof=1) / math.sqrt(samples)) if samples > 1 else float("nan")
    return MonteCarloEstimate(value=float(per_sample.mean()), std_error=std_error, samples=samples)


def se_trajectory(
    pa: PowerAllocation,
    params: CodeParams,
    mode: SEMode = SEMode.ASYMPTOTIC,
    tol: Optional[float] = None,
    max_t: Optional[int] = None,
    samples: Optional[int] = None,
    seed: Optional[int] = 0,
) -> SETrajectory:
    """
    Iterate state evolution until tau2 settles.

    Args:
        pa: Power allocation
        params: Code parameters (R, sigma2, n, M are used)
        mode: Large-system indicator or Monte-Carlo evaluation of x(tau)
        tol: Stopping tolerance relative to sigma2 + P
        max_t: Iteration cap
        samples: Monte-Carlo samples per evaluation (montecarlo mode)
        seed: Monte-Carlo seed, reused at every iteration

    Returns:
        SETrajectory; converged is True when tau2_T <= sigma2 (1 + tol)
    """
    tol = settings.se_tolerance if tol is None else tol
    max_t = settings.se_max_iterations if max_t is None else max_t
    if not tol > 0:
        raise InvalidParameterError(f"tol must be > 0, got {tol}")
    if max_t < 1:
        raise InvalidParameterError(f"max_t must be >= 1, got {max_t}")
    mode = SEMode(mode)
    sigma2, P = params.sigma2, pa.P
    step_tol = tol * (sigma2 + P)

    tau2_seq = [sigma2 + P]
    x_seq = []
    for _ in range(max_t):
        tau2 = tau2_seq[-1]
        if tau2 <= 0:
            break
        if mode is SEMode.ASYMPTOTIC:
            x = se_x_asymptotic(tau2, pa, params.R)
        else:
            x = se_x_montecarlo(math.sqrt(tau2), pa, params.n, params.M, samples, seed).value
        x = min(max(x, 0.0), 1.0)
        x_seq.append(x)
        tau2_seq.append(sigma2 + P * (1.0 - x))
        if abs(tau2_seq[-1] - tau2) < step_tol:
            break

    converged = tau2_seq[-1] <= sigma2 * (1.0 + tol)
    if not converged:
        logger.debug(
            f"State evolution stalled at tau2={tau2_seq[-1]:.6g} after {len(x_seq)} iterations"
        )
    return SETrajectory(tau2_seq=tuple(tau2_seq), x_seq=tuple(x_seq), converged=converged)


def predict_se_esec(
    tau_T: float,
    pa: PowerAllocation,
    n: int,
    M: int,
    samples: Optional[int] = None,
    seed: Optional[int] = 0,
    decision: str = "hard",
) -> MonteCarloEstimate:
    """
    Section error rate at the final state-evolution noise level tau_T.

    With ``decision="hard"`` a section is in error when some wrong column
    beats the true one in s = beta + tau_T * Z, which is what the hard
    decision does. ``decision="soft"`` averages 1 - (softmax weight on the
    true column) instead.

    Returns:
        MonteCarloEstimate of the average over sections
    """
    samples = settings.mc_samples if samples is None else samples
    if samples < 1:
        raise InvalidParameterError(f"samples must be >= 1, got {samples}")
    if not tau_T > 0:
        raise InvalidParameterError(f"tau_T must be > 0, got {tau_T}")
    if decision not in ("hard", "soft"):
        raise InvalidParameterError(f"decision must be 'hard' or 'soft', got {decision}")
    if M == 1:
        return MonteCarloEstimate(value=0.0, std_error=0.0, samples=samples)

    c = np.sqrt(n * pa.powers) / tau_T
    rng = np.random.default_rng(seed)
    if decision == "soft":
        unique, inverse = np.unique(c, return_inverse=True)
        weights = _expected_weights(unique, M, samples, rng)
        per_sample = (1.0 - weights[:, inverse]).mean(axis=1)
    else:
        # error in section l iff max_{j>=2} U_j - U_1 > c_l
        gap = np.empty(samples)
        start = 0
        while start < samples:
            rows = min(_CHUNK, samples - start)
            u = rng.standard_normal((rows, M))
            gap[start:start + rows] = u[:, 1:].max(axis=1) - u[:, 0]
            start += rows
        per_sample = np.searchsorted(np.sort(c), gap, side="left") / c.size
    std_error = float(per_sample.std(ddof=1) / math.sqrt(samples)) if samples > 1 else float("nan")
    return MonteCarloEstimate(value=float(per_sample.mean()), std_error=std_error, samples=samples)


def _section_error_probability(c: np.ndarray, M: int, quad_points: int) -> np.ndarray:
    """1 - E_U[Phi(c + U)^(M-1)] by Gauss-Hermite quadrature."""
    nodes, weights = hermegauss(quad_points)
    weights = weights / math.sqrt(2.0 * math.pi)
    log_phi = log_ndtr(c[:, None] + nodes[None, :])
    return -np.expm1((M - 1) * log_phi) @ weights


def _section_error_probability_fine(c: np.ndarray, M: int) -> np.ndarray:
    """Same expectation by the trapezoid rule on a dense grid over [-14, 14]."""
    u = np.linspace(-14.0, 14.0, 8193)
    density = np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)
    du = u[1] - u[0]
    values = -np.expm1((M - 1) * log_ndtr(c[:, None] + u[None, :])) * density[None, :]
    return values.sum(axis=1) * du


def predict_esec_closed(
    pa: PowerAllocation,
    sigma: float,
    n: int,
    M: int,
    quad_points: Optional[int] = None,
) -> ErrorPrediction:
    """
    Closed-form per-section error probabilities and their aggregates.

    P_err,l = 1 - E_U[Phi(sqrt(n P_l)/sigma + U)^(M-1)] with U ~ N(0, 1),
    evaluated in log space. The Gauss-Hermite rule of order ``quad_points``
    is checked against order 2*quad_points; when the two disagree a dense
    trapezoid rule is used instead.

    Args:
        pa: Power allocation
        sigma: Noise standard deviation
        n: Code length
        M: Columns per section
        quad_points: Gauss-Hermite order (settings.quad_points by default)

    Returns:
        ErrorPrediction with esec = mean(P_err) and ecw = 1 - prod(1 - P_err)

    Raises:
        QuadratureError: When the result is not a probability
    """
    quad_points = settings.quad_points if quad_points is None else quad_points
    if quad_points < 1:
        raise InvalidParameterError(f"quad_points must be >= 1, got {quad_points}")
    if sigma < 0:
        raise InvalidParameterError(f"sigma must be >= 0, got {sigma}")
    if M < 1:
        raise InvalidParameterError(f"M must be >= 1, got {M}")

    quadrature = "gauss_hermite"
    if M == 1 or sigma == 0:
        per_section = np.zeros(pa.L)
    else:
        unique, inverse = np.unique(np.sqrt(n * pa.powers) / sigma, return_inverse=True)
        coarse = _section_error_probability(unique, M, quad_points)
        refined = _section_error_probability(unique, M, 2 * quad_points)
        if np.max(np.abs(refined - coarse)) > _QUAD_TOL:
            logger.warning(
                f"Gauss-Hermite order {quad_points} not converged for M={M}; using the trapezoid rule"
            )
            coarse = _section_error_probability_fine(unique, M)
            quadrature = "trapezoid"
        if not np.all(np.isfinite(coarse)) or np.any(coarse < -1e-12) or np.any(coarse > 1 + 1e-12):
            raise QuadratureError(f"Section error probabilities left [0, 1] (M={M}, quad_points={quad_points})")
        per_section = np.clip(coarse, 0.0, 1.0)[inverse]

    esec = float(per_section.mean())
    ecw = float(-np.expm1(np.sum(np.log1p(-per_section))))
    return ErrorPrediction(esec=esec, ecw=max(ecw, esec), per_section=per_section, quadrature=quadrature)
