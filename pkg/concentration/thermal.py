#  Copyright 2025 Canonical Ltd.
#  See LICENSE file for licensing details.

"""Module for the rates of thermal reduced states described by a partition function.

The partition function follows the convention Xi(beta) = log Tr exp(+beta H) per site; physical
Gibbs states correspond to negated energies.
"""
import logging
import math
from typing import Callable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.interpolate import PchipInterpolator
from scipy.special import logsumexp

from concentration import asymptotics
from concentration.asymptotics import RenyiProfile

logger = logging.getLogger(__name__)

CONVEXITY_TOLERANCE = 1e-8
RANGE_TOLERANCE = 1e-12

Level = tuple[float, int]
RealFunction = Callable[[float], float]


class PartitionFunctionError(Exception):
    """Raised when a partition function is invalid or evaluated outside its range."""


class PartitionFunction(BaseModel):
    """A per-site log partition function beta -> Xi(beta).

    Attributes:
        xi: Xi(beta).
        dxi: Xi'(beta).
        d2xi: Xi''(beta), when known.
        beta_min: The smallest beta at which Xi may be evaluated.
        beta_max: The largest beta at which Xi may be evaluated.
        energy_range: The smallest and largest energy, for level-based partition functions.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    xi: RealFunction
    dxi: RealFunction
    d2xi: Optional[RealFunction] = None
    beta_min: float = -math.inf
    beta_max: float = math.inf
    energy_range: Optional[tuple[float, float]] = None

    @classmethod
    def from_levels(cls, levels: Sequence[Level]) -> "PartitionFunction":
        """Build Xi(beta) = log sum g e^{beta E} of a noninteracting chain.

        Args:
            levels: The per-site (energy, degeneracy) pairs.

        Returns:
            The closed-form partition function.

        Raises:
            PartitionFunctionError: If no level is given or a degeneracy is not positive.
        """
        if not levels:
            raise PartitionFunctionError("At least one energy level is needed.")
        energies = np.array([float(energy) for energy, _ in levels])
        degeneracies = np.array([float(degeneracy) for _, degeneracy in levels])
        if np.any(degeneracies <= 0):
            raise PartitionFunctionError(f"Degeneracies must be positive: {degeneracies}")

        def weights(beta: float) -> np.ndarray:
            exponents = beta * energies + np.log(degeneracies)
            return np.exp(exponents - logsumexp(exponents))

        def first(beta: float) -> float:
            return float(np.dot(weights(beta), energies))

        def second(beta: float) -> float:
            mean = first(beta)
            return float(np.dot(weights(beta), (energies - mean) ** 2))

        return cls(
            xi=lambda beta: float(logsumexp(beta * energies, b=degeneracies)),
            dxi=first,
            d2xi=second,
            energy_range=(float(energies.min()), float(energies.max())),
        )

    @classmethod
    def from_table(cls, betas: Sequence[float], xis: Sequence[float]) -> "PartitionFunction":
        """Build Xi from tabulated samples by monotone cubic interpolation.

        Args:
            betas: The sample points, distinct.
            xis: Xi at each sample point.

        Returns:
            The interpolated partition function; evaluation outside the table is an error.

        Raises:
            PartitionFunctionError: If the table is too short or not convex.
        """
        if len(betas) != len(xis) or len(betas) < 3:
            raise PartitionFunctionError("A table needs at least three (beta, Xi) samples.")
        order = np.argsort(betas)
        beta_grid = np.asarray(betas, dtype=float)[order]
        xi_grid = np.asarray(xis, dtype=float)[order]
        if np.any(np.diff(beta_grid) <= 0):
            raise PartitionFunctionError("Tabulated beta values must be distinct.")
        slopes = np.diff(xi_grid) / np.diff(beta_grid)
        if np.any(np.diff(slopes) < -CONVEXITY_TOLERANCE):
            raise PartitionFunctionError("Tabulated Xi is not convex.")
        interpolator = PchipInterpolator(beta_grid, xi_grid, extrapolate=False)
        derivative = interpolator.derivative()
        second = interpolator.derivative(2)
        low, high = float(beta_grid[0]), float(beta_grid[-1])

        def checked(function: Callable) -> RealFunction:
            def evaluate(beta: float) -> float:
                if beta < low - RANGE_TOLERANCE or beta > high + RANGE_TOLERANCE:
                    raise PartitionFunctionError(
                        f"beta = {beta} is outside the tabulated range [{low}, {high}]"
                    )
                return float(function(min(max(beta, low), high)))

            return evaluate

        return cls(
            xi=checked(interpolator),
            dxi=checked(derivative),
            d2xi=checked(second),
            beta_min=low,
            beta_max=high,
        )


def _order_range(pf: PartitionFunction, beta0: float) -> tuple[float, float]:
    """Translate the beta range of a partition function into a range of orders s.

    Args:
        pf: The partition function.
        beta0: The inverse temperature.

    Returns:
        The range of s with s beta0 inside the beta range, intersected with s >= 0.
    """
    if beta0 == 0:
        return 0.0, math.inf
    bounds = sorted((pf.beta_min / beta0, pf.beta_max / beta0))
    return max(bounds[0], 0.0), bounds[1]


def profile_from_partition(pf: PartitionFunction, beta0: float) -> RenyiProfile:
    """Build the profile psi(s) = Xi(s beta0) - s Xi(beta0).

    Args:
        pf: The partition function.
        beta0: The inverse temperature.

    Returns:
        The Rényi profile of the thermal reduced state.

    Raises:
        PartitionFunctionError: If beta0 is outside the range of the partition function.
    """
    s_min, s_max = _order_range(pf, beta0)
    if not s_min <= 1.0 <= s_max:
        raise PartitionFunctionError(f"beta0 = {beta0} is outside the partition function range")
    xi0 = pf.xi(beta0)
    h_inf = None
    if pf.energy_range is not None:
        extreme = pf.energy_range[1] if beta0 >= 0 else pf.energy_range[0]
        h_inf = xi0 - beta0 * extreme
    d2psi = None
    if pf.d2xi is not None:
        d2xi = pf.d2xi

        def d2psi(s: float) -> float:
            return beta0 * beta0 * d2xi(s * beta0)

    return RenyiProfile(
        psi=lambda s: pf.xi(s * beta0) - s * xi0,
        dpsi=lambda s: beta0 * pf.dxi(s * beta0) - xi0,
        d2psi=d2psi,
        h_inf=h_inf,
        s_min=s_min,
        s_max=s_max,
    )


class ThermalRates(BaseModel):
    """All rates of a thermal reduced state at one inverse temperature.

    Attributes:
        beta0: The inverse temperature.
        r: The exponent the exponent-dependent rates are evaluated at.
        b_const: -beta0 Xi'(beta0) + Xi(beta0), the optimal rate with constant error.
        b_const_bracket: (H-, H+) from the profile.
        b_fail: The optimal rate with failure exponent r.
        b_succ_p: The success exponent of probabilistic protocols at excess rate r.
        b_succ_d: The fidelity exponent of deterministic protocols at excess rate r.
        r_half: -(beta0/2) Xi'(beta0/2) + Xi(beta0) - Xi(beta0/2), where the two differ.
    """

    beta0: float
    r: float
    b_const: float
    b_const_bracket: tuple[float, float]
    b_fail: float
    b_succ_p: float
    b_succ_d: float
    r_half: float


def r_half(pf: PartitionFunction, beta0: float) -> float:
    """Compute the excess rate beyond which deterministic protocols beat probabilistic ones.

    Args:
        pf: The partition function.
        beta0: The inverse temperature.

    Returns:
        -(beta0/2) Xi'(beta0/2) + Xi(beta0) - Xi(beta0/2).
    """
    half = 0.5 * beta0
    return -half * pf.dxi(half) + pf.xi(beta0) - pf.xi(half)


def thermal_rates(pf: PartitionFunction, beta0: float, r: float) -> ThermalRates:
    """Evaluate every rate of a thermal reduced state.

    Args:
        pf: The partition function.
        beta0: The inverse temperature.
        r: The exponent, nonnegative.

    Returns:
        The rates.
    """
    profile = profile_from_partition(pf, beta0)
    rates = ThermalRates(
        beta0=beta0,
        r=r,
        b_const=-beta0 * pf.dxi(beta0) + pf.xi(beta0),
        b_const_bracket=asymptotics.rate_constant(profile),
        b_fail=asymptotics.rate_failure_exponent(profile, r),
        b_succ_p=asymptotics.rate_success_exponent_pflec(profile, r),
        b_succ_d=asymptotics.rate_success_exponent_dflec(profile, r),
        r_half=r_half(pf, beta0),
    )
    logger.debug("Thermal rates at beta0=%s: %s", beta0, rates)
    return rates
