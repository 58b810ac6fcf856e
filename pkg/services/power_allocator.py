"""
Power allocation constructors: flat, exponential, modified exponential and the
iterative block algorithm, plus the helpers used to tune R_PA.
"""
import logging
import math
from typing import List, Optional, Tuple

import numpy as np

from config import settings
from exceptions import InvalidParameterError
from models.code_params import CodeParams
from models.power_allocation import PAScheme, PowerAllocation

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)


def min_required_power(tau2: float, R: float, L: int) -> float:
    """
    Smallest section power decodable at effective noise tau2: 2 ln2 R tau2 / L.

    Raises:
        InvalidParameterError: On tau2 <= 0, R < 0 or L < 1
    """
    if not tau2 > 0:
        raise InvalidParameterError(f"tau2 must be > 0, got {tau2}")
    if R < 0:
        raise InvalidParameterError(f"R must be >= 0, got {R}")
    if L < 1:
        raise InvalidParameterError(f"L must be >= 1, got {L}")
    return 2.0 * LN2 * R * tau2 / L


def flat(L: int, P: float) -> PowerAllocation:
    """Equal power P/L in every section."""
    _check_basic(L, P)
    return PowerAllocation(powers=np.full(L, P / L), P=P, scheme=PAScheme.FLAT)


def exponential(L: int, P: float, C: float) -> PowerAllocation:
    """P_l proportional to 2^(-2Cl/L), normalized in closed form."""
    _check_basic(L, P)
    if not C > 0:
        raise InvalidParameterError(f"C must be > 0, got {C}")
    ell = np.arange(1, L + 1)
    scale = P * math.expm1(2.0 * C * LN2 / L) / -math.expm1(-2.0 * C * LN2)
    powers = scale * np.exp2(-2.0 * C * ell / L)
    return PowerAllocation(powers=powers, P=P, scheme=PAScheme.EXPONENTIAL, parameters={"C": C})


def modified_exponential(L: int, P: float, C: float, a: float, f: float) -> PowerAllocation:
    """
    Exponential decay with steepness a, flattened after the first f*L sections.

    Raises:
        InvalidParameterError: Unless a >= 0 and 0 <= f <= 1
    """
    _check_basic(L, P)
    if a < 0:
        raise InvalidParameterError(f"a must be >= 0, got {a}")
    if not 0.0 <= f <= 1.0:
        raise InvalidParameterError(f"f must lie in [0, 1], got {f}")
    weights = _modified_weights(L, C, a, f)
    return PowerAllocation(
        powers=P * weights / weights.sum(),
        P=P,
        scheme=PAScheme.MODIFIED_EXPONENTIAL,
        parameters={"C": C, "a": a, "f": f},
    )


def _modified_weights(L: int, C: float, a: float, f: float) -> np.ndarray:
    ell = np.arange(1, L + 1, dtype=float)
    exponent = np.where(ell <= f * L + 1e-9, ell / L, f)
    return np.exp2(-2.0 * a * C * exponent)


def iterative(L: int, B: int, sigma2: float, P: float, R_PA: float) -> PowerAllocation:
    """
    Block-wise allocation driven by the asymptotic state evolution.

    Each block receives the minimum power decodable at tau2 = sigma2 + P_remain
    until an equal split of the remaining power beats that minimum; the rest
    is then flat. The result is rescaled to sum to P.

    Args:
        L: Number of sections
        B: Number of blocks (must divide L)
        sigma2: Noise variance the allocation is designed for
        P: Total power
        R_PA: Design rate (0 gives the flat allocation)

    Raises:
        InvalidParameterError: When B does not divide L or an input is out of range
    """
    _check_basic(L, P)
    if B < 1 or L % B:
        raise InvalidParameterError(f"B={B} must divide L={L}", "Pick B from the divisors of L")
    if sigma2 < 0:
        raise InvalidParameterError(f"sigma2 must be >= 0, got {sigma2}")
    if R_PA < 0:
        raise InvalidParameterError(f"R_PA must be >= 0, got {R_PA}")
    if R_PA == 0:
        return flat(L, P)

    k = L // B
    powers = np.zeros(L)
    flattened_at: Optional[int] = None
    for b in range(B):
        p_remain = P - powers[:b * k].sum()
        tau2 = sigma2 + p_remain
        p_block = max(2.0 * LN2 * R_PA * tau2 / L, 0.0)
        p_spread = p_remain / (L - b * k)
        if p_spread > p_block:
            powers[b * k:] = p_spread
            flattened_at = b
            break
        powers[b * k:(b + 1) * k] = p_block

    total = powers.sum()
    if abs(total - P) > 1e-9 * P:
        logger.warning(
            f"Iterative allocation sums to {total:.6g} instead of P={P} "
            f"(L={L}, B={B}, R_PA={R_PA}); rescaling"
        )
    powers *= P / total
    return PowerAllocation(
        powers=powers,
        P=P,
        scheme=PAScheme.ITERATIVE,
        parameters={"B": B, "R_PA": R_PA, "sigma2": sigma2, "flattening_block": flattened_at},
    )


def flattening_block(pa: PowerAllocation, B: int) -> Optional[int]:
    """
    First block from which every section carries the same power.

    Iterative allocations report the block recorded while they were built.
    Otherwise the block is read off the shape, and an allocation whose flat
    run is only its last block counts as never flattening.

    Returns:
        Block index, or None when the allocation never flattens.
    """
    if B < 1 or pa.L % B:
        raise InvalidParameterError(f"B={B} must divide L={pa.L}")
    if pa.scheme is PAScheme.ITERATIVE and pa.parameters.get("B") == B:
        return pa.parameters.get("flattening_block")
    k = pa.L // B
    equal = np.isclose(pa.powers, pa.powers[-1], rtol=1e-12, atol=0.0)
    b = B
    while b > 0 and np.all(equal[(b - 1) * k:b * k]):
        b -= 1
    if B > 1 and b >= B - 1:
        return None
    return b


def default_rpa(R: float) -> float:
    """R_PA = R above one bit per channel use, flat (0) otherwise."""
    return R if R > 1.0 else 0.0


def default_blocks(L: int) -> int:
    return L


def rpa_grid(R: float, span: int, step: Optional[float] = None) -> List[float]:
    """
    Candidate R_PA values R(1 + k*step) for k in [-span, span].

    0 (the flat allocation) is included when R <= 1.
    """
    if not R > 0:
        raise InvalidParameterError(f"R must be > 0, got {R}")
    if span < 0:
        raise InvalidParameterError(f"span must be >= 0, got {span}")
    step = settings.rpa_sweep_step if step is None else step
    values = {round(R * (1.0 + k * step), 12) for k in range(-span, span + 1)}
    values = {v for v in values if v > 0}
    if R <= 1.0:
        values.add(0.0)
    return sorted(values)


def match_modified_exponential(
    reference: PowerAllocation,
    C: float,
    B: Optional[int] = None,
    tol: float = 1e-10,
) -> Tuple[float, float, PowerAllocation]:
    """
    Modified exponential (a, f) that mimics an iterative allocation.

    f is the fraction of sections before the reference flattens; a is found
    by bisection so the first-section powers agree.

    Returns:
        (a, f, allocation)
    """
    L, P = reference.L, reference.P
    block = flattening_block(reference, B or L)
    k = L // (B or L)
    f = 1.0 if block is None else block * k / L
    target = float(reference.powers[0])

    def first_power(a: float) -> float:
        weights = _modified_weights(L, C, a, f)
        return P * weights[0] / weights.sum()

    if f == 0.0 or target <= P / L * (1.0 + tol):
        a = 0.0
    else:
        lo, hi = 0.0, 1.0
        while first_power(hi) < target and hi < 1e6:
            lo, hi = hi, hi * 2.0
        while hi - lo > tol * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if first_power(mid) < target:
                lo = mid
            else:
                hi = mid
        a = 0.5 * (lo + hi)
    logger.debug(f"Matched modified exponential a={a:.6f}, f={f:.4f} to P_1={target:.6g}")
    return a, f, modified_exponential(L, P, C, a, f)


def allocate(
    scheme: PAScheme,
    params: CodeParams,
    R_PA: Optional[float] = None,
    B: Optional[int] = None,
    a: float = 1.0,
    f: float = 1.0,
    design_sigma2: Optional[float] = None,
) -> PowerAllocation:
    """
    Build an allocation for ``params`` from a scheme tag.

    The iterative scheme uses the default R_PA policy and B = L unless given.
    """
    C = params.capacity
    sigma2 = params.sigma2 if design_sigma2 is None else design_sigma2
    if scheme is PAScheme.FLAT:
        return flat(params.L, params.P)
    if scheme is PAScheme.EXPONENTIAL:
        return exponential(params.L, params.P, C)
    if scheme is PAScheme.MODIFIED_EXPONENTIAL:
        return modified_exponential(params.L, params.P, C, a, f)
    rpa = default_rpa(params.R) if R_PA is None else R_PA
    blocks = default_blocks(params.L) if B is None else B
    return iterative(params.L, blocks, sigma2, params.P, rpa)


def _check_basic(L: int, P: float) -> None:
    if L < 1:
        raise InvalidParameterError(f"L must be >= 1, got {L}")
    if not P > 0:
        raise InvalidParameterError(f"P must be > 0, got {P}")
