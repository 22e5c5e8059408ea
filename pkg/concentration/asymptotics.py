#  Copyright 2025 Canonical Ltd.
#  See LICENSE file for licensing details.

"""Module for asymptotic rates and exponents of entanglement concentration.

Every formula is driven by a Rényi profile s -> psi(s), the limit of (1/n) log Tr rho_n^s.
The one-dimensional optimizations rely on the monotone stationarity numerator
g(s) = psi'(s)(1 - s) + r + psi(s), whose derivative is psi''(s)(1 - s).
"""
import logging
import math
from enum import Enum
from functools import cached_property, partial
from typing import Callable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.optimize import brentq, minimize_scalar

from concentration import spectra
from concentration.info_spectrum import Quantity, RateCurve
from concentration.rate import Rate
from concentration.spectra import WeightedSpectrum

logger = logging.getLogger(__name__)

DERIVATIVE_STEP = 1e-5
ONE_SIDED_STEP = 1e-6
BISECTION_TOLERANCE = 1e-10
SINGULARITY_WIDTH = 1e-7
PSI_ONE_TOLERANCE = 1e-9
CONVEXITY_TOLERANCE = 1e-8
ORDER_SEARCH_LIMIT = 1e6
CONVEXITY_GRID_SPACING = 0.05
CONVEXITY_GRID_END = 4.0
CONSTANT_RATE_AGREEMENT = 1e-5

RealFunction = Callable[[float], float]


class AsymptoticsError(Exception):
    """Base class for asymptotic formula errors."""


class ParameterError(AsymptoticsError):
    """Raised when a rate parameter is out of range."""


class DomainError(AsymptoticsError):
    """Raised when a formula is requested outside the interval on which it is stated."""


class FeasibilityError(AsymptoticsError):
    """Raised when the feasible set of a grid formula is empty."""


class Formula(str, Enum):
    """The rate formulas evaluated on sampled curves.

    Attributes:
        CONST: sup{R | K(R) <= eps}, the optimal rate with constant error.
        FAIL: sup{R | zeta^c(R) >= r}, the optimal rate with failure exponent r.
        SUCC_P: sup{a - zeta(a) | zeta(a) <= r}, probabilistic success exponent.
        SUCC_D: the running-infimum formula for the deterministic success exponent.
        SOURCE_CODING: sup{a - zeta(a) | zeta(a) < r}, the strict source-coding variant.
    """

    CONST = "const"
    FAIL = "fail"
    SUCC_P = "succ-p"
    SUCC_D = "succ-d"
    SOURCE_CODING = "source-coding"


class RenyiProfile(BaseModel):
    """The limit s -> psi(s) = lim (1/n) log Tr rho_n^s with its derivatives.

    Attributes:
        psi: psi(s) in nats per copy.
        dpsi: The first derivative; central differences are used when omitted.
        d2psi: The second derivative; central differences are used when omitted.
        h_inf: The limit of -psi(s)/s at infinity, when known in closed form.
        s_min: The smallest order at which psi may be evaluated.
        s_max: The largest order at which psi may be evaluated.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    psi: RealFunction
    dpsi: Optional[RealFunction] = None
    d2psi: Optional[RealFunction] = None
    h_inf: Optional[float] = None
    s_min: float = 0.0
    s_max: float = math.inf

    @model_validator(mode="after")
    def _check_profile(self) -> "RenyiProfile":
        """Validate normalization and convexity.

        Returns:
            The validated profile.

        Raises:
            ValueError: If psi(1) is not 0 or psi is not convex on the test grid.
        """
        if not self.s_min <= 1.0 <= self.s_max:
            raise ValueError("The order range must contain s = 1.")
        if abs(self.psi(1.0)) > PSI_ONE_TOLERANCE:
            raise ValueError(f"psi(1) must vanish, got {self.psi(1.0)}")
        step = CONVEXITY_GRID_SPACING
        end = min(self.s_max, CONVEXITY_GRID_END)
        for s in np.arange(self.s_min + step, end - step, step):
            second = self.psi(s - step) - 2.0 * self.psi(s) + self.psi(s + step)
            if second < -CONVEXITY_TOLERANCE:
                raise ValueError(f"psi is not convex around s={s}")
        return self

    def derivative(self, s: float) -> float:
        """Evaluate psi'(s).

        Args:
            s: The order.

        Returns:
            The first derivative.
        """
        if self.dpsi is not None:
            return self.dpsi(s)
        low = max(s - DERIVATIVE_STEP, self.s_min)
        high = min(s + DERIVATIVE_STEP, self.s_max)
        return (self.psi(high) - self.psi(low)) / (high - low)

    def second_derivative(self, s: float) -> float:
        """Evaluate psi''(s).

        Args:
            s: The order.

        Returns:
            The second derivative.
        """
        if self.d2psi is not None:
            return self.d2psi(s)
        low = max(s - DERIVATIVE_STEP, self.s_min)
        high = min(s + DERIVATIVE_STEP, self.s_max)
        return (self.derivative(high) - self.derivative(low)) / (high - low)

    @cached_property
    def h_plus(self) -> float:
        """H+ = -psi'(1 - 0)."""
        return -self.derivative(1.0 - ONE_SIDED_STEP)

    @cached_property
    def h_minus(self) -> float:
        """H- = -psi'(1 + 0)."""
        return -self.derivative(1.0 + ONE_SIDED_STEP)

    @cached_property
    def top(self) -> float:
        """-psi'(+0), the right end of the interval on which zeta is stated."""
        return -self.derivative(self.s_min)

    @cached_property
    def h_infinity(self) -> float:
        """H_inf = lim -psi'(s) as s grows."""
        if self.h_inf is not None:
            return self.h_inf
        s, previous = 2.0, -self.derivative(1.0 + ONE_SIDED_STEP)
        while s <= min(self.s_max, ORDER_SEARCH_LIMIT):
            current = -self.derivative(s)
            if abs(current - previous) < BISECTION_TOLERANCE:
                return current
            s, previous = 2.0 * s, current
        logger.warning("H_inf did not converge; using -psi'(%s) = %s", s / 2.0, previous)
        return previous


class EntropyBracket(BaseModel):
    """The ordered entropies H_inf <= H- <= H+ <= -psi'(+0) of a profile.

    Attributes:
        h_infinity: The min-entropy rate.
        h_minus: -psi'(1 + 0).
        h_plus: -psi'(1 - 0).
        top: -psi'(+0).
    """

    h_infinity: float
    h_minus: float
    h_plus: float
    top: float


def profile_from_spectrum(base: WeightedSpectrum) -> RenyiProfile:
    """Build the i.i.d. profile psi(s) = log sum m v^s of a single-copy spectrum.

    Args:
        base: The single-copy spectrum.

    Returns:
        The profile with analytic derivatives and H_inf = -log v_max.
    """
    return RenyiProfile(
        psi=partial(spectra.renyi_psi, base),
        dpsi=lambda s: spectra.renyi_psi_derivatives(base, s)[0],
        d2psi=lambda s: spectra.renyi_psi_derivatives(base, s)[1],
        h_inf=-base.log_values[0],
    )


def entropy_bracket(profile: RenyiProfile) -> EntropyBracket:
    """Collect the entropies bounding the rates of a profile.

    Args:
        profile: The profile.

    Returns:
        The bracket.
    """
    return EntropyBracket(
        h_infinity=profile.h_infinity,
        h_minus=profile.h_minus,
        h_plus=profile.h_plus,
        top=profile.top,
    )


def rate_constant(profile: RenyiProfile) -> tuple[float, float]:
    """Bracket the optimal rate with constant error.

    Args:
        profile: The profile.

    Returns:
        (H-, H+); both equal the entropy for i.i.d. sources.
    """
    return profile.h_minus, profile.h_plus


def _check_rate(r: float) -> None:
    """Reject negative exponents.

    Args:
        r: The exponent.

    Raises:
        ParameterError: If r is negative.
    """
    if r < 0 or math.isnan(r):
        raise ParameterError(f"The exponent r must be nonnegative, got {r}")


def _root(function: RealFunction, low: float, high: float) -> Optional[float]:
    """Find a sign change by bisection.

    Args:
        function: The function.
        low: The left end of the bracket.
        high: The right end of the bracket.

    Returns:
        The root, or None when the bracket does not change sign.
    """
    try:
        return brentq(function, low, high, xtol=BISECTION_TOLERANCE)
    except ValueError:
        return None


def _grow_bracket(function: RealFunction, low: float, limit: float) -> Optional[float]:
    """Double the right end of a bracket until a decreasing function turns negative.

    Args:
        function: The decreasing function, positive at `low`.
        low: The left end.
        limit: The largest right end allowed.

    Returns:
        A right end at which the function is negative, or None if none exists below the limit.
    """
    high = max(2.0 * low, low + 1.0)
    while high <= limit:
        if function(high) < 0:
            return high
        high *= 2.0
    if function(limit) < 0:
        return limit
    return None


def _legendre_on_unit_interval(profile: RenyiProfile, a: float) -> float:
    """Evaluate sup_{0 <= s <= 1} (1 - s) a - psi(s) for H+ < a < -psi'(+0).

    Args:
        profile: The profile.
        a: The rate.

    Returns:
        The supremum.
    """

    def objective(s: float) -> float:
        return (1.0 - s) * a - profile.psi(s)

    stationary = _root(
        lambda s: -profile.derivative(s) - a, profile.s_min, 1.0 - ONE_SIDED_STEP
    )
    if stationary is None:
        logger.debug("No sign change for a=%s; falling back to golden section", a)
        result = minimize_scalar(
            lambda s: -objective(s), bounds=(profile.s_min, 1.0), method="bounded"
        )
        stationary = float(result.x)
    return max(objective(stationary), 0.0)


def zeta_asymptotic(profile: RenyiProfile, a: float, clamp: bool = True) -> Rate:
    """Evaluate the limit exponent zeta(a) of the mass below e^{-na}.

    Args:
        profile: The profile.
        a: The rate.
        clamp: Whether to hold the boundary value beyond -psi'(+0) instead of failing.

    Returns:
        0 for a <= H+, the Legendre supremum up to -psi'(+0), the clamped boundary value beyond.

    Raises:
        DomainError: If a >= -psi'(+0) and clamping is disabled.
    """
    if a <= profile.h_plus:
        return Rate(value=0.0)
    if a >= profile.top:
        if not clamp:
            raise DomainError(
                f"zeta is stated only for a < -psi'(+0) = {profile.top}, got a = {a}"
            )
        logger.warning("zeta(%s) clamped to its value at -psi'(+0) = %s", a, profile.top)
        return Rate(value=profile.top - profile.psi(profile.s_min), clamped=True)
    return Rate(value=_legendre_on_unit_interval(profile, a))


def zeta_c_asymptotic(profile: RenyiProfile, a: float) -> Rate:
    """Evaluate the limit exponent zeta^c(a) of the mass at or above e^{-na}.

    Args:
        profile: The profile.
        a: The rate.

    Returns:
        +inf below H_inf, 0 from H- on, sup_{s >= 1} (1 - s) a - psi(s) in between.
    """
    if a < profile.h_infinity:
        return Rate.infinite()
    if a >= profile.h_minus:
        return Rate(value=0.0)

    def objective(s: float) -> float:
        return (1.0 - s) * a - profile.psi(s)

    def slope(s: float) -> float:
        return -profile.derivative(s) - a

    low = 1.0 + ONE_SIDED_STEP
    high = _grow_bracket(slope, low, min(profile.s_max, ORDER_SEARCH_LIMIT))
    if high is None:
        # the supremum is approached as s grows without bound
        return Rate(value=objective(min(profile.s_max, ORDER_SEARCH_LIMIT)))
    stationary = _root(slope, low, high)
    if stationary is None:
        stationary = high
    return Rate(value=max(objective(stationary), 0.0))


def _numerator(profile: RenyiProfile, r: float, s: float) -> float:
    """Evaluate g(s) = psi'(s)(1 - s) + r + psi(s).

    Args:
        profile: The profile.
        r: The exponent.
        s: The order.

    Returns:
        The stationarity numerator.
    """
    return profile.derivative(s) * (1.0 - s) + r + profile.psi(s)


def rate_failure_exponent(profile: RenyiProfile, r: float) -> float:
    """Evaluate the optimal rate whose failure probability decays as e^{-nr}.

    Args:
        profile: The profile.
        r: The failure exponent.

    Returns:
        sup_{s >= 1} (r + psi(s)) / (1 - s); H- at r = 0 and H_inf for r >= H_inf.

    Raises:
        ParameterError: If r is negative.
    """
    _check_rate(r)
    if r == 0:
        return profile.h_minus
    if r >= profile.h_infinity:
        return profile.h_infinity
    low = 1.0 + ONE_SIDED_STEP
    limit = min(profile.s_max, ORDER_SEARCH_LIMIT)
    high = _grow_bracket(partial(_numerator, profile, r), low, limit)
    if high is None:
        return profile.h_infinity
    stationary = _root(partial(_numerator, profile, r), low, high)
    if stationary is None:
        stationary = high
    return (r + profile.psi(stationary)) / (1.0 - stationary)


def rate_success_exponent_pflec(profile: RenyiProfile, r: float) -> float:
    """Evaluate the exponent of the success probability of a probabilistic protocol at rate r.

    Args:
        profile: The profile.
        r: The excess rate.

    Returns:
        min_{0 <= s <= 1} (s r + psi(s)) / (1 - s); H+ at r = 0 and psi(0) once
        r >= -psi'(+0) - psi(0).

    Raises:
        ParameterError: If r is negative.
    """
    _check_rate(r)
    if r == 0:
        return profile.h_plus
    if _numerator(profile, r, profile.s_min) >= 0:
        return profile.psi(profile.s_min)
    stationary = _root(partial(_numerator, profile, r), profile.s_min, 1.0 - SINGULARITY_WIDTH)
    if stationary is None:
        return profile.h_plus
    return (stationary * r + profile.psi(stationary)) / (1.0 - stationary)


def dflec_threshold(profile: RenyiProfile) -> float:
    """Compute r* = -psi'(1/2)/2 - psi(1/2), where deterministic protocols start to win.

    Args:
        profile: The profile.

    Returns:
        The threshold r*.
    """
    return -0.5 * profile.derivative(0.5) - profile.psi(0.5)


def rate_success_exponent_dflec(profile: RenyiProfile, r: float) -> float:
    """Evaluate the exponent of the fidelity of a deterministic protocol at rate r.

    Args:
        profile: The profile.
        r: The excess rate.

    Returns:
        The probabilistic exponent up to r*, 2 psi(1/2) + r beyond.

    Raises:
        ParameterError: If r is negative.
    """
    _check_rate(r)
    if r <= dflec_threshold(profile):
        return rate_success_exponent_pflec(profile, r)
    return 2.0 * profile.psi(0.5) + r


def _constrained_sup(
    a_values: np.ndarray,
    objective: np.ndarray,
    constraint: np.ndarray,
    bound: float,
    strict: bool = False,
) -> float:
    """Maximize a sampled objective subject to a sampled constraint <= bound.

    Grid points are candidates when feasible; where feasibility changes between neighbours the
    crossing point is located by linear interpolation and its interpolated objective is a
    candidate as well. Intervals with an infinite endpoint are not interpolated.

    Args:
        a_values: The increasing abscissae.
        objective: The objective at each abscissa.
        constraint: The constraint at each abscissa.
        bound: The constraint bound.
        strict: Whether the constraint is strict.

    Returns:
        The largest candidate objective.

    Raises:
        FeasibilityError: If no candidate exists.
    """
    with np.errstate(invalid="ignore"):
        feasible = constraint < bound if strict else constraint <= bound
    candidates = list(objective[feasible & np.isfinite(objective)])
    for i in range(len(a_values) - 1):
        if feasible[i] == feasible[i + 1]:
            continue
        ends = (constraint[i], constraint[i + 1], objective[i], objective[i + 1])
        if not all(math.isfinite(end) for end in ends) or constraint[i] == constraint[i + 1]:
            continue
        weight = (bound - constraint[i]) / (constraint[i + 1] - constraint[i])
        candidates.append(objective[i] + weight * (objective[i + 1] - objective[i]))
    if not candidates:
        raise FeasibilityError(f"The feasible set is empty on the grid for bound {bound}")
    return float(max(candidates))


def optimal_rates(
    curve_k: Optional[RateCurve],
    curve_zeta: Optional[RateCurve],
    curve_zeta_c: Optional[RateCurve],
    eps_or_r: float,
    which: Formula,
) -> float:
    """Evaluate a general rate formula on sampled information-spectrum curves.

    Args:
        curve_k: The sampled K curve, needed by CONST.
        curve_zeta: The sampled zeta curve, needed by SUCC_P, SUCC_D and SOURCE_CODING.
        curve_zeta_c: The sampled zeta^c curve, needed by FAIL.
        eps_or_r: The error level eps (CONST) or the exponent r (all other formulas).
        which: The formula.

    Returns:
        The rate in nats per copy.

    Raises:
        ParameterError: If a required curve is missing.
        FeasibilityError: If the feasible set is empty on the grid.
    """
    required = {
        Formula.CONST: curve_k,
        Formula.FAIL: curve_zeta_c,
    }.get(which, curve_zeta)
    if required is None:
        raise ParameterError(f"Formula {which.value} needs its curve")
    a_values = required.a_values
    values = required.values
    if which == Formula.CONST:
        return _constrained_sup(a_values, a_values, values, eps_or_r)
    if which == Formula.FAIL:
        return _constrained_sup(a_values, a_values, -values, -eps_or_r)
    if which in (Formula.SUCC_P, Formula.SOURCE_CODING):
        return _constrained_sup(
            a_values,
            a_values - values,
            values,
            eps_or_r,
            strict=which == Formula.SOURCE_CODING,
        )
    running_inf = np.minimum.accumulate(values - a_values / 2.0)
    return _constrained_sup(
        a_values, a_values / 2.0 - running_inf, running_inf + a_values / 2.0, eps_or_r
    )


def asymptotic_curve(
    profile: RenyiProfile, label: Quantity, a_grid: Sequence[float], clamp: bool = False
) -> RateCurve:
    """Sample K, zeta or zeta^c from their closed forms.

    Args:
        profile: The profile.
        label: The quantity, one of K, ZETA and ZETA_C.
        a_grid: Increasing rates.
        clamp: Whether zeta may be clamped beyond -psi'(+0).

    Returns:
        The sampled curve.

    Raises:
        ParameterError: If the quantity has no closed form here.
        DomainError: If K is requested while H- and H+ differ.
    """
    if label == Quantity.K:
        if abs(profile.h_plus - profile.h_minus) > CONSTANT_RATE_AGREEMENT:
            raise DomainError(
                f"K is not a step function: H- = {profile.h_minus}, H+ = {profile.h_plus}"
            )
        entropy = 0.5 * (profile.h_plus + profile.h_minus)
        points = [(a, 0.0 if a < entropy else 1.0) for a in a_grid]
    elif label == Quantity.ZETA:
        points = [(a, float(zeta_asymptotic(profile, a, clamp=clamp))) for a in a_grid]
    elif label == Quantity.ZETA_C:
        points = [(a, float(zeta_c_asymptotic(profile, a))) for a in a_grid]
    else:
        raise ParameterError(f"No closed form for {label.value}")
    return RateCurve(label=label, points=points)
