#  Copyright 2025 Canonical Ltd.
#  See LICENSE file for licensing details.

"""Module for intrinsic randomness and its duality with entanglement concentration.

A partition map sends every eigenvalue of a spectrum, taken with repetition in descending order,
to one of M buckets numbered 0..M-1. The bucket masses are compared with the uniform
distribution on M symbols.
"""
import heapq
import logging
import math
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from concentration import asymptotics
from concentration.asymptotics import ParameterError, RenyiProfile
from concentration.info_spectrum import Quantity, RateCurve
from concentration.spectra import WeightedSpectrum

logger = logging.getLogger(__name__)

IDENTITY_TOLERANCE = 1e-12


class PartitionMapError(Exception):
    """Raised when a partition map does not fit its spectrum."""


class PartitionMap(BaseModel):
    """A surjection from eigenvalue positions onto M buckets.

    Attributes:
        assignment: The bucket of each eigenvalue, in descending eigenvalue order.
        bucket_count: M, the number of buckets.
    """

    model_config = ConfigDict(frozen=True)

    assignment: tuple[int, ...]
    bucket_count: int = Field(ge=1)

    @model_validator(mode="after")
    def _check_surjective(self) -> "PartitionMap":
        """Validate that every bucket is hit.

        Returns:
            The validated map.

        Raises:
            ValueError: If a bucket index is out of range or a bucket is empty.
        """
        if any(not 0 <= bucket < self.bucket_count for bucket in self.assignment):
            raise ValueError(f"Bucket indices must lie in [0, {self.bucket_count})")
        if len(set(self.assignment)) != self.bucket_count:
            raise ValueError("Every bucket needs at least one eigenvalue.")
        return self


class DualityReport(BaseModel):
    """The Hellinger criterion of a partition map and the fidelity it corresponds to.

    Attributes:
        epsilon: 1 - sum sqrt(P_i / M).
        fidelity: (sum sqrt(P_i / M))^2, the fidelity of the corresponding concentration.
        square_residual: |(1 - epsilon)^2 - fidelity|.
        complement_residual: |2 epsilon - epsilon^2 - (1 - fidelity)|.
        sandwich_holds: Whether epsilon <= 1 - fidelity <= 2 epsilon.
    """

    epsilon: float
    fidelity: float
    square_residual: float
    complement_residual: float
    sandwich_holds: bool


class RandomnessBounds(BaseModel):
    """Upper bounds on the optimal randomness rates from concentration rates.

    Attributes:
        eps: The Hellinger error level.
        r: The exponent.
        b_h: Bound on B_H(eps) by B_D(2 eps - eps^2).
        b_e_h: Bound on B_e,H(r) by B_e,D(r).
        b_star_e_h: Bound on B*_e,H(r) by B*_e,D(2r).
        b_kl: B_KL(eps) for a continuous zeta, equal to B*_e,P(eps).
    """

    eps: float
    r: float
    b_h: float
    b_e_h: float
    b_star_e_h: float
    b_kl: float


def bucket_masses(p: WeightedSpectrum, pm: PartitionMap) -> np.ndarray:
    """Sum the eigenvalues that land in each bucket.

    Args:
        p: The spectrum.
        pm: The partition map.

    Returns:
        The M bucket masses.

    Raises:
        PartitionMapError: If the map does not cover the spectrum exactly.
    """
    if len(pm.assignment) != p.dimension:
        raise PartitionMapError(
            f"The map covers {len(pm.assignment)} eigenvalues, the spectrum has {p.dimension}"
        )
    return np.bincount(pm.assignment, weights=p.expanded(), minlength=pm.bucket_count)


def _overlap(masses: np.ndarray) -> float:
    """Compute sum sqrt(P_i / M).

    Args:
        masses: The bucket masses.

    Returns:
        The overlap with the uniform distribution, at most 1.
    """
    return min(math.fsum(np.sqrt(masses / masses.size)), 1.0)


def hellinger_epsilon(p: WeightedSpectrum, pm: PartitionMap) -> float:
    """Compute half the squared Hellinger distance to the uniform distribution.

    Args:
        p: The spectrum.
        pm: The partition map.

    Returns:
        epsilon = 1 - sum sqrt(P_i / M), in [0, 1].
    """
    return 1.0 - _overlap(bucket_masses(p, pm))


def kl_deficit(p: WeightedSpectrum, pm: PartitionMap) -> float:
    """Compute the divergence D(p_M || P) of the bucket masses from the uniform distribution.

    Args:
        p: The spectrum.
        pm: The partition map.

    Returns:
        -log M - (1/M) sum log P_i, nonnegative.

    Raises:
        PartitionMapError: If a bucket carries no mass.
    """
    masses = bucket_masses(p, pm)
    if np.any(masses <= 0):
        raise PartitionMapError("Every bucket needs a positive mass.")
    return max(-math.log(masses.size) - float(np.mean(np.log(masses))), 0.0)


def greedy_partition(p: WeightedSpectrum, bucket_count: int) -> PartitionMap:
    """Assign eigenvalues, largest first, to the currently lightest bucket.

    Ties between equally light buckets go to the lowest bucket index.

    Args:
        p: The spectrum.
        bucket_count: M.

    Returns:
        The partition map.

    Raises:
        PartitionMapError: If the spectrum has fewer eigenvalues than buckets.
    """
    if bucket_count < 1 or p.dimension < bucket_count:
        raise PartitionMapError(
            f"Cannot fill {bucket_count} buckets from {p.dimension} eigenvalues"
        )
    heap = [(0.0, bucket) for bucket in range(bucket_count)]
    assignment = []
    for value in p.expanded():
        mass, bucket = heapq.heappop(heap)
        assignment.append(bucket)
        heapq.heappush(heap, (mass + float(value), bucket))
    return PartitionMap(assignment=tuple(assignment), bucket_count=bucket_count)


def singleton_partition(p: WeightedSpectrum) -> PartitionMap:
    """Put every eigenvalue in a bucket of its own.

    Args:
        p: The spectrum.

    Returns:
        The identity map with M equal to the dimension.
    """
    return PartitionMap(assignment=tuple(range(p.dimension)), bucket_count=p.dimension)


def duality_check(p: WeightedSpectrum, pm: PartitionMap) -> DualityReport:
    """Relate the Hellinger criterion to the fidelity of the corresponding concentration.

    Args:
        p: The spectrum.
        pm: The partition map.

    Returns:
        The report with both identity residuals and the sandwich check.
    """
    masses = bucket_masses(p, pm)
    epsilon = 1.0 - _overlap(masses)
    fidelity = math.fsum(np.sqrt(masses / masses.size)) ** 2
    infidelity = 1.0 - fidelity
    report = DualityReport(
        epsilon=epsilon,
        fidelity=fidelity,
        square_residual=abs((1.0 - epsilon) ** 2 - fidelity),
        complement_residual=abs(2.0 * epsilon - epsilon**2 - infidelity),
        sandwich_holds=(
            epsilon <= infidelity + IDENTITY_TOLERANCE
            and infidelity <= 2.0 * epsilon + IDENTITY_TOLERANCE
        ),
    )
    logger.debug("Duality check with M=%d: %s", pm.bucket_count, report)
    return report


def b_kl(curve_zeta: RateCurve, eps: float) -> float:
    """Evaluate B_KL(eps) = sup{a - zeta(a) | zeta(a) < eps} on a sampled zeta curve.

    Args:
        curve_zeta: The sampled zeta curve.
        eps: The divergence level.

    Returns:
        The optimal rate under the divergence criterion.

    Raises:
        ParameterError: If the curve is not a zeta curve.
    """
    if curve_zeta.label != Quantity.ZETA:
        raise ParameterError(f"B_KL needs a zeta curve, got {curve_zeta.label.value}")
    return asymptotics.optimal_rates(
        None, curve_zeta, None, eps, asymptotics.Formula.SOURCE_CODING
    )


def randomness_bounds(profile: RenyiProfile, eps: float, r: float) -> RandomnessBounds:
    """Bound the optimal randomness rates of a profile by its concentration rates.

    Args:
        profile: The profile.
        eps: The Hellinger error level, in (0, 1).
        r: The exponent, nonnegative.

    Returns:
        The bounds.

    Raises:
        ParameterError: If eps is outside (0, 1).
    """
    if not 0.0 < eps < 1.0:
        raise ParameterError(f"The error level must lie in (0, 1), got {eps}")
    return RandomnessBounds(
        eps=eps,
        r=r,
        b_h=profile.h_plus,
        b_e_h=asymptotics.rate_failure_exponent(profile, r),
        b_star_e_h=asymptotics.rate_success_exponent_dflec(profile, 2.0 * r),
        b_kl=asymptotics.rate_success_exponent_pflec(profile, eps),
    )


def random_partition(
    p: WeightedSpectrum, bucket_count: int, rng: np.random.Generator
) -> PartitionMap:
    """Draw a surjective partition map uniformly over bucket labels.

    The first M eigenvalues of a random permutation are spread over distinct buckets so that
    no bucket stays empty.

    Args:
        p: The spectrum.
        bucket_count: M.
        rng: The random generator.

    Returns:
        The partition map.

    Raises:
        PartitionMapError: If the spectrum has fewer eigenvalues than buckets.
    """
    if bucket_count < 1 or p.dimension < bucket_count:
        raise PartitionMapError(
            f"Cannot fill {bucket_count} buckets from {p.dimension} eigenvalues"
        )
    assignment = rng.integers(0, bucket_count, size=p.dimension)
    positions = rng.permutation(p.dimension)[:bucket_count]
    assignment[positions] = np.arange(bucket_count)
    return PartitionMap(
        assignment=tuple(int(bucket) for bucket in assignment), bucket_count=bucket_count
    )


def parse_assignment(assignment: Sequence[int], bucket_count: int) -> PartitionMap:
    """Build a partition map from user input.

    Args:
        assignment: The bucket of each eigenvalue.
        bucket_count: M.

    Returns:
        The validated partition map.

    Raises:
        PartitionMapError: If the map is not surjective or has out-of-range buckets.
    """
    try:
        return PartitionMap(assignment=tuple(assignment), bucket_count=bucket_count)
    except ValueError as exc:
        raise PartitionMapError(str(exc)) from exc
