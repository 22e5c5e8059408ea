#  Copyright 2025 Canonical Ltd.
#  See LICENSE file for licensing details.

"""Module for logarithmic moment functions, their Legendre transforms and tail exponents."""
import logging
import math
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.optimize import brentq, minimize_scalar
from scipy.special import expit, logit

from concentration.asymptotics import RenyiProfile, profile_from_spectrum
from concentration.rate import Rate
from concentration.spectra import WeightedSpectrum

logger = logging.getLogger(__name__)

T_MAX = 1e6
SLOPE_STEP = 1e-6
DERIVATIVE_STEP = 1e-5
DIVERGENCE_TOLERANCE = 1e-9
ORIGIN_TOLERANCE = 1e-9
CONVEXITY_TOLERANCE = 1e-8
ORDER_TOLERANCE = 1e-9
RICHARDSON_TOLERANCE = 1e-6
BISECTION_TOLERANCE = 1e-12

RealFunction = Callable[[float], float]


class SlopeOrderError(Exception):
    """Raised when the slope constants are not ordered, which signals a non-convex input."""


class LogMGF(BaseModel):
    """A limiting logarithmic moment function t -> Lambda(t).

    Attributes:
        log_moment: Lambda(t).
        dlog_moment: Lambda'(t); central differences are used when omitted.
        t_min: The smallest t at which Lambda is finite.
        t_max: The largest t at which Lambda is finite.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    log_moment: RealFunction
    dlog_moment: Optional[RealFunction] = None
    t_min: float = -math.inf
    t_max: float = math.inf

    @model_validator(mode="after")
    def _check_function(self) -> "LogMGF":
        """Validate Lambda(0) = 0 and convexity.

        Returns:
            The validated function.

        Raises:
            ValueError: If Lambda(0) is not 0 or Lambda is not convex on the test grid.
        """
        if not self.t_min <= 0.0 <= self.t_max:
            raise ValueError("The domain must contain t = 0.")
        if abs(self.log_moment(0.0)) > ORIGIN_TOLERANCE:
            raise ValueError(f"Lambda(0) must vanish, got {self.log_moment(0.0)}")
        step = 0.1
        for t in np.arange(max(self.t_min, -4.0) + step, min(self.t_max, 4.0) - step, step):
            moment = self.log_moment
            second = moment(t - step) - 2.0 * moment(t) + moment(t + step)
            if second < -CONVEXITY_TOLERANCE:
                raise ValueError(f"Lambda is not convex around t={t}")
        return self

    def derivative(self, t: float) -> float:
        """Evaluate Lambda'(t).

        Args:
            t: The argument.

        Returns:
            The derivative.
        """
        if self.dlog_moment is not None:
            return self.dlog_moment(t)
        low = max(t - DERIVATIVE_STEP, self.t_min)
        high = min(t + DERIVATIVE_STEP, self.t_max)
        return (self.log_moment(high) - self.log_moment(low)) / (high - low)


class SlopeConstants(BaseModel):
    """The limits R1 >= R2 >= R3 >= R4 of Lambda(t)/t at +inf, +0, -0 and -inf.

    Attributes:
        r1: The slope at +inf, possibly +inf.
        r2: The slope at +0.
        r3: The slope at -0.
        r4: The slope at -inf, possibly -inf.
    """

    model_config = ConfigDict(ser_json_inf_nan="constants")

    r1: float
    r2: float
    r3: float
    r4: float


class TailExponents(BaseModel):
    """Decay exponents of P{X_n/n >= a}, P{X_n/n > a}, P{X_n/n <= a} and P{X_n/n < a}.

    Attributes:
        upper_ge: The exponent of the upper tail including a.
        upper_gt: The exponent of the upper tail excluding a.
        lower_le: The exponent of the lower tail including a.
        lower_lt: The exponent of the lower tail excluding a.
    """

    upper_ge: Rate
    upper_gt: Rate
    lower_le: Rate
    lower_lt: Rate


def gaussian(variance: float = 1.0, mean: float = 0.0) -> LogMGF:
    """Build Lambda(t) = mean t + variance t^2 / 2.

    Args:
        variance: The variance.
        mean: The mean.

    Returns:
        The Gaussian log-moment function.
    """
    return LogMGF(
        log_moment=lambda t: mean * t + 0.5 * variance * t * t,
        dlog_moment=lambda t: mean + variance * t,
    )


def bernoulli(q: float, low: float = 0.0, high: float = 1.0) -> LogMGF:
    """Build the log-moment function of a variable equal to `high` with probability q.

    Args:
        q: The probability of the high value, in (0, 1).
        low: The low value.
        high: The high value.

    Returns:
        Lambda(t) = log(q e^{t high} + (1 - q) e^{t low}).

    Raises:
        ValueError: If q is outside (0, 1) or low >= high.
    """
    if not 0.0 < q < 1.0 or low >= high:
        raise ValueError(f"Invalid two-point variable: q={q}, low={low}, high={high}")
    spread = high - low
    log_odds = float(logit(q))
    return LogMGF(
        log_moment=lambda t: float(
            np.logaddexp(math.log(q) + t * high, math.log1p(-q) + t * low)
        ),
        dlog_moment=lambda t: low + spread * float(expit(t * spread + log_odds)),
    )


def linear(c: float) -> LogMGF:
    """Build the degenerate Lambda(t) = c t.

    Args:
        c: The constant value of the variable.

    Returns:
        The linear log-moment function.
    """
    return LogMGF(log_moment=lambda t: c * t, dlog_moment=lambda t: c)


def from_profile(profile: RenyiProfile) -> LogMGF:
    """Build Lambda(t) = psi(1 - t), the log-moment function of -log p_i per copy.

    Args:
        profile: The Rényi profile.

    Returns:
        The log-moment function on 1 - s_max <= t <= 1 - s_min.
    """
    return LogMGF(
        log_moment=lambda t: profile.psi(1.0 - t),
        dlog_moment=lambda t: -profile.derivative(1.0 - t),
        t_min=1.0 - profile.s_max,
        t_max=1.0 - profile.s_min,
    )


def from_spectrum(sp: WeightedSpectrum) -> LogMGF:
    """Build the log-moment function of -log p_i for p_i drawn from a spectrum.

    Args:
        sp: The single-copy spectrum.

    Returns:
        Lambda(t) = log sum m v^{1 - t}, defined for every t.
    """
    profile = profile_from_spectrum(sp)
    return LogMGF(
        log_moment=lambda t: profile.psi(1.0 - t),
        dlog_moment=lambda t: -profile.derivative(1.0 - t),
    )


def _maximize(mgf: LogMGF, rate: float, low: float, high: float) -> Rate:
    """Evaluate sup_{low <= t <= high} t R - Lambda(t).

    The objective is concave with derivative R - Lambda'(t). An infinite end of the interval is
    replaced by +-T_MAX; if the derivative is still bounded away from 0 there, the supremum
    diverges.

    Args:
        mgf: The log-moment function.
        rate: R.
        low: The left end of the interval, possibly -inf.
        high: The right end of the interval, possibly +inf.

    Returns:
        The supremum, +inf when it diverges.
    """
    low_end = max(low, mgf.t_min, -T_MAX)
    high_end = min(high, mgf.t_max, T_MAX)

    def slope(t: float) -> float:
        return rate - mgf.derivative(t)

    if slope(high_end) >= 0:
        if high_end >= T_MAX and slope(high_end) > DIVERGENCE_TOLERANCE:
            logger.debug("Legendre supremum diverges upwards for R=%s", rate)
            return Rate.infinite()
        stationary = high_end
    elif slope(low_end) <= 0:
        if low_end <= -T_MAX and slope(low_end) < -DIVERGENCE_TOLERANCE:
            logger.debug("Legendre supremum diverges downwards for R=%s", rate)
            return Rate.infinite()
        stationary = low_end
    else:
        stationary = brentq(slope, low_end, high_end, xtol=BISECTION_TOLERANCE)
    return Rate(value=max(stationary * rate - mgf.log_moment(stationary), 0.0))


def rate_function(mgf: LogMGF, rate: float) -> Rate:
    """Evaluate the Legendre transform Lambda*(R) = sup_t t R - Lambda(t).

    Args:
        mgf: The log-moment function.
        rate: R.

    Returns:
        Lambda*(R), +inf when the supremum diverges.
    """
    return _maximize(mgf, rate, -math.inf, math.inf)


def _limit_slope(mgf: LogMGF, direction: float) -> float:
    """Estimate lim Lambda'(t) as t goes to +inf or -inf.

    Args:
        mgf: The log-moment function.
        direction: +1 for +inf, -1 for -inf.

    Returns:
        The limit, +-inf when Lambda' keeps growing between T_MAX/2 and T_MAX.
    """
    bound = mgf.t_max if direction > 0 else mgf.t_min
    if math.isfinite(bound):
        return mgf.derivative(bound)
    far = mgf.derivative(direction * T_MAX)
    half = mgf.derivative(direction * T_MAX / 2.0)
    if abs(far - half) > RICHARDSON_TOLERANCE * max(1.0, abs(far)):
        return direction * math.inf
    return far


def slope_constants(mgf: LogMGF) -> SlopeConstants:
    """Compute R1..R4.

    Args:
        mgf: The log-moment function.

    Returns:
        The slope constants.

    Raises:
        SlopeOrderError: If R4 <= R3 <= R2 <= R1 fails.
    """
    constants = SlopeConstants(
        r1=_limit_slope(mgf, 1.0),
        r2=mgf.derivative(SLOPE_STEP),
        r3=mgf.derivative(-SLOPE_STEP),
        r4=_limit_slope(mgf, -1.0),
    )
    ordered = (
        constants.r4 <= constants.r3 + ORDER_TOLERANCE
        and constants.r3 <= constants.r2 + ORDER_TOLERANCE
        and constants.r2 <= constants.r1 + ORDER_TOLERANCE
    )
    if not ordered:
        raise SlopeOrderError(f"Slope constants are not ordered: {constants}")
    return constants


def tail_exponents(mgf: LogMGF, a: float, t_upper: Optional[float] = None) -> TailExponents:
    """Evaluate the upper and lower tail exponents at a.

    Args:
        mgf: The log-moment function.
        a: The threshold.
        t_upper: Restrict the upper-tail supremum to 0 < t <= t_upper; Lambda must be
            differentiable there.

    Returns:
        The four tail exponents.
    """
    constants = slope_constants(mgf)
    if a <= constants.r2:
        upper = Rate(value=0.0)
    elif a > constants.r1:
        upper = Rate.infinite()
    else:
        upper = _maximize(mgf, a, 0.0, t_upper if t_upper is not None else math.inf)
    if a >= constants.r3:
        lower = Rate(value=0.0)
    elif a < constants.r4:
        lower = Rate.infinite()
    else:
        lower = _maximize(mgf, a, -math.inf, 0.0)
    return TailExponents(upper_ge=upper, upper_gt=upper, lower_le=lower, lower_lt=lower)


def double_transform(mgf: LogMGF, t: float) -> float:
    """Evaluate Lambda**(t) = sup_R t R - Lambda*(R).

    The supremum is searched over R between Lambda'(t - 1) and Lambda'(t + 1), which contains
    the maximizer Lambda'(t).

    Args:
        mgf: The log-moment function.
        t: The argument.

    Returns:
        Lambda**(t), equal to Lambda(t) for convex Lambda.
    """
    low = mgf.derivative(max(t - 1.0, mgf.t_min))
    high = mgf.derivative(min(t + 1.0, mgf.t_max))
    if high - low < BISECTION_TOLERANCE:
        return t * low - float(rate_function(mgf, low))
    result = minimize_scalar(
        lambda rate: float(rate_function(mgf, rate)) - t * rate,
        bounds=(low, high),
        method="bounded",
        options={"xatol": 1e-9},
    )
    return -float(result.fun)
