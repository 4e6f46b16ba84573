"""
Chi-squared tail math
Upper quantiles of chi2(K) by inverting the regularized incomplete gamma function
"""

import math
import logging

from scipy.special import gammainc, gammaincc, gammaln

from src.core.errors import InvalidArgumentError
from src.core.input_validator import InputValidator

logger = logging.getLogger(__name__)

CDF_TOLERANCE = 1e-10
BISECTION_STEPS = 60
NEWTON_STEPS = 50


def chi2_upper_tail(x: float, K: int) -> float:
    """Pr[Y > x] for Y ~ chi2(K)"""
    if x <= 0.0:
        return 1.0
    return float(gammaincc(K / 2.0, x / 2.0))


def chi2_cdf(x: float, K: int) -> float:
    """Pr[Y <= x] for Y ~ chi2(K)"""
    if x <= 0.0:
        return 0.0
    return float(gammainc(K / 2.0, x / 2.0))


def chi2_pdf(x: float, K: int) -> float:
    if x <= 0.0:
        return 0.0
    half = K / 2.0
    log_pdf = (half - 1.0) * math.log(x) - x / 2.0 - half * math.log(2.0) - float(gammaln(half))
    return math.exp(log_pdf)


def chi2_quantile(alpha: float, K: int) -> float:
    """
    Upper alpha-quantile of chi2(K): the x >= 0 with Pr[Y > x] = alpha.

    Bisection brackets the root, Newton polishes it. The residual is taken on
    whichever tail is smaller so levels close to 1 keep their precision.
    """
    alpha = InputValidator.probability(alpha, "alpha")
    K = InputValidator.positive_int(K, "K")
    if alpha == 1.0:
        return 0.0

    if alpha <= 0.5:
        def residual(x: float) -> float:
            return chi2_upper_tail(x, K) - alpha
        sign = -1.0  # residual decreases in x
    else:
        lower = 1.0 - alpha

        def residual(x: float) -> float:
            return chi2_cdf(x, K) - lower
        sign = 1.0

    lo, hi = 0.0, max(1.0, float(K))
    while sign * residual(hi) < 0.0:
        lo, hi = hi, hi * 2.0
        if hi > 1e8:
            raise InvalidArgumentError(f"alpha={alpha} is too small to invert for K={K}")

    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if sign * residual(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-6 * max(1.0, hi):
            break

    x = 0.5 * (lo + hi)
    for _ in range(NEWTON_STEPS):
        f = residual(x)
        if abs(f) <= CDF_TOLERANCE * 1e-4:
            break
        slope = sign * chi2_pdf(x, K)
        if slope == 0.0:
            break
        step = f / slope
        candidate = x - step
        # Newton must stay inside the bracket found above
        if not (lo <= candidate <= hi):
            candidate = 0.5 * (lo + hi)
        if sign * residual(candidate) < 0.0:
            lo = candidate
        else:
            hi = candidate
        if abs(candidate - x) <= 1e-15 * max(1.0, x):
            x = candidate
            break
        x = candidate

    if abs(residual(x)) > CDF_TOLERANCE:
        logger.warning(f"chi2_quantile({alpha}, {K}) residual {residual(x):.3e} above tolerance")
    return x
