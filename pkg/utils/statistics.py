"""
Binomial confidence intervals for error-rate estimates.
"""
import math
from typing import Tuple

from scipy.stats import norm


def wilson_interval(errors: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    """
    Wilson score interval for a binomial proportion.

    Args:
        errors: Number of trials in error
        trials: Number of trials
        confidence: Two-sided confidence level

    Returns:
        (low, high); (0.0, 1.0) when there are no trials
    """
    if trials <= 0:
        return 0.0, 1.0
    z = float(norm.ppf(0.5 + confidence / 2.0))
    p = errors / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    centre = (p + z2 / (2.0 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)
