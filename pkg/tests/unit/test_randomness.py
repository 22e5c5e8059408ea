#  Copyright 2025 Canonical Ltd.
#  See LICENSE file for licensing details.

"""Unit tests for the randomness module."""
import math

import numpy as np
import pytest

from concentration import asymptotics, protocols, randomness, spectra
from concentration.asymptotics import FeasibilityError, ParameterError, RenyiProfile
from concentration.info_spectrum import Quantity, RateCurve
from concentration.randomness import PartitionMap, PartitionMapError
from concentration.spectra import WeightedSpectrum
from tests.unit.helpers import random_spectrum


@pytest.fixture(name="profile")
def profile_fixture() -> RenyiProfile:
    """The i.i.d. profile of (0.75, 0.25)."""
    return asymptotics.profile_from_spectrum(spectra.from_values([0.75, 0.25]))


@pytest.fixture(name="curve_zeta")
def curve_zeta_fixture(profile: RenyiProfile) -> RateCurve:
    """zeta of (0.75, 0.25) sampled below -psi'(+0)."""
    return asymptotics.asymptotic_curve(profile, Quantity.ZETA, np.linspace(0.3, 0.83, 1061))


@pytest.mark.parametrize(
    "sp, bucket_count, expected",
    [
        pytest.param(WeightedSpectrum.uniform(4), 2, (0, 1, 0, 1), id="uniform"),
        pytest.param(spectra.from_values([0.5, 0.25, 0.25]), 2, (0, 1, 1), id="half"),
        pytest.param(spectra.from_values([0.6, 0.4]), 1, (0, 0), id="single bucket"),
    ],
)
def test_greedy_partition(sp: WeightedSpectrum, bucket_count: int, expected: tuple[int, ...]):
    """
    arrange: A spectrum and a bucket count.
    act: Build the greedy partition.
    assert: Eigenvalues go, largest first, to the lightest bucket.
    """
    pm = randomness.greedy_partition(sp, bucket_count)

    assert pm.assignment == expected
    assert pm.bucket_count == bucket_count


def test_greedy_partition_too_many_buckets():
    """
    arrange: A spectrum with two eigenvalues.
    act: Ask for three buckets.
    assert: A PartitionMapError is raised.
    """
    with pytest.raises(PartitionMapError) as exc_info:
        randomness.greedy_partition(spectra.from_values([0.6, 0.4]), 3)

    assert "Cannot fill 3 buckets" in str(exc_info.value)


def test_singleton_partition_measures():
    """
    arrange: The spectrum (0.7, 0.3) with each eigenvalue in its own bucket.
    act: Compute the Hellinger error and the divergence deficit.
    assert: Both match their closed forms.
    """
    sp = spectra.from_values([0.7, 0.3])
    pm = randomness.singleton_partition(sp)

    assert randomness.hellinger_epsilon(sp, pm) == pytest.approx(
        1.0 - (math.sqrt(0.35) + math.sqrt(0.15)), abs=1e-12
    )
    assert randomness.hellinger_epsilon(sp, pm) == pytest.approx(0.0210937, abs=1e-7)
    assert randomness.kl_deficit(sp, pm) == pytest.approx(0.087177, abs=1e-6)


def test_perfect_partition_has_no_error():
    """
    arrange: The uniform spectrum of dimension 4 split greedily into two buckets.
    act: Compute both error measures.
    assert: Both vanish.
    """
    sp = WeightedSpectrum.uniform(4)
    pm = randomness.greedy_partition(sp, 2)

    assert randomness.hellinger_epsilon(sp, pm) == pytest.approx(0.0, abs=1e-12)
    assert randomness.kl_deficit(sp, pm) == pytest.approx(0.0, abs=1e-12)


def test_uneven_greedy_partition_has_error():
    """
    arrange: The uniform spectrum of dimension 4 split greedily into three buckets.
    act: Compute the Hellinger error.
    assert: One bucket carries twice the mass, so the error is positive.
    """
    sp = WeightedSpectrum.uniform(4)
    pm = randomness.greedy_partition(sp, 3)

    expected = 1.0 - (math.sqrt(0.5 / 3) + 2 * math.sqrt(0.25 / 3))
    assert randomness.hellinger_epsilon(sp, pm) == pytest.approx(expected, abs=1e-12)
    assert randomness.hellinger_epsilon(sp, pm) == pytest.approx(0.0144, abs=1e-4)


def test_duality_identities(rng: np.random.Generator):
    """
    arrange: 1000 random spectra with random surjective partition maps.
    act: Run the duality check.
    assert: Both identities hold to rounding and the sandwich holds.
    """
    for _ in range(1000):
        sp = random_spectrum(rng, 8)
        pm = randomness.random_partition(sp, int(rng.integers(1, sp.dimension + 1)), rng)

        report = randomness.duality_check(sp, pm)

        assert report.square_residual < 1e-12
        assert report.complement_residual < 1e-12
        assert report.sandwich_holds
        assert 0.0 <= report.epsilon <= 1.0


def test_singleton_fidelity_is_deterministic_optimum(rng: np.random.Generator):
    """
    arrange: Random spectra with each eigenvalue in its own bucket.
    act: Compare the duality fidelity with the optimal deterministic fidelity at full size.
    assert: They agree.
    """
    for _ in range(30):
        sp = random_spectrum(rng)
        pm = randomness.singleton_partition(sp)

        report = randomness.duality_check(sp, pm)

        expected = protocols.dflec_max_fidelity(sp, sp.dimension).fidelity
        assert report.fidelity == pytest.approx(expected, abs=1e-9)


def test_random_partition_is_surjective(rng: np.random.Generator):
    """
    arrange: A spectrum of dimension 6.
    act: Draw random partitions onto 6 buckets.
    assert: Every bucket is used.
    """
    sp = spectra.iid_product(spectra.from_values([0.5, 0.3, 0.2]), 2)

    for _ in range(20):
        pm = randomness.random_partition(sp, 6, rng)

        assert sorted(set(pm.assignment)) == list(range(6))
        assert len(pm.assignment) == sp.dimension


@pytest.mark.parametrize(
    "assignment, bucket_count, message",
    [
        pytest.param([0, 2], 2, "must lie in", id="bucket out of range"),
        pytest.param([0, -1], 2, "must lie in", id="negative bucket"),
        pytest.param([0, 0], 2, "Every bucket", id="not surjective"),
    ],
)
def test_parse_assignment_invalid(assignment: list[int], bucket_count: int, message: str):
    """
    arrange: An invalid bucket assignment.
    act: Parse it.
    assert: A PartitionMapError is raised.
    """
    with pytest.raises(PartitionMapError) as exc_info:
        randomness.parse_assignment(assignment, bucket_count)

    assert message in str(exc_info.value)


def test_bucket_masses_size_mismatch():
    """
    arrange: A map covering two eigenvalues and a spectrum with three.
    act: Compute the bucket masses.
    assert: A PartitionMapError is raised.
    """
    pm = PartitionMap(assignment=(0, 1), bucket_count=2)

    with pytest.raises(PartitionMapError) as exc_info:
        randomness.bucket_masses(spectra.from_values([0.5, 0.3, 0.2]), pm)

    assert "covers 2 eigenvalues" in str(exc_info.value)


def test_bucket_masses():
    """
    arrange: A map of (0.5, 0.3, 0.2) sending the extremes together.
    act: Compute the bucket masses.
    assert: The masses are summed per bucket.
    """
    pm = randomness.parse_assignment([0, 1, 0], 2)

    masses = randomness.bucket_masses(spectra.from_values([0.5, 0.3, 0.2]), pm)

    np.testing.assert_allclose(masses, [0.7, 0.3])


@pytest.mark.parametrize("eps", [0.01, 0.05, 0.1])
def test_b_kl_matches_probabilistic_exponent(
    profile: RenyiProfile, curve_zeta: RateCurve, eps: float
):
    """
    arrange: zeta of (0.75, 0.25) on a fine grid.
    act: Evaluate B_KL.
    assert: It matches the probabilistic success exponent at r = eps.
    """
    expected = asymptotics.rate_success_exponent_pflec(profile, eps)

    assert randomness.b_kl(curve_zeta, eps) == pytest.approx(expected, abs=1e-3)


def test_b_kl_is_monotone(curve_zeta: RateCurve):
    """
    arrange: A sampled zeta curve.
    act: Evaluate B_KL at increasing levels.
    assert: The values do not decrease.
    """
    values = [randomness.b_kl(curve_zeta, eps) for eps in (0.01, 0.02, 0.05, 0.1)]

    assert values == sorted(values)


def test_b_kl_at_zero_is_infeasible(curve_zeta: RateCurve):
    """
    arrange: A sampled zeta curve.
    act: Evaluate B_KL at eps = 0.
    assert: No rate satisfies the strict constraint.
    """
    with pytest.raises(FeasibilityError):
        randomness.b_kl(curve_zeta, 0.0)


def test_b_kl_needs_zeta(profile: RenyiProfile):
    """
    arrange: A zeta^c curve.
    act: Evaluate B_KL on it.
    assert: A ParameterError is raised.
    """
    curve = asymptotics.asymptotic_curve(profile, Quantity.ZETA_C, np.linspace(0.3, 0.6, 31))

    with pytest.raises(ParameterError) as exc_info:
        randomness.b_kl(curve, 0.05)

    assert "needs a zeta curve" in str(exc_info.value)


def test_randomness_bounds(profile: RenyiProfile):
    """
    arrange: The profile of (0.75, 0.25).
    act: Bound the randomness rates at eps = 0.05 and r = 0.1.
    assert: Each bound is the matching concentration rate.
    """
    bounds = randomness.randomness_bounds(profile, 0.05, 0.1)

    assert bounds.b_h == pytest.approx(profile.h_plus)
    assert bounds.b_e_h == pytest.approx(asymptotics.rate_failure_exponent(profile, 0.1))
    assert bounds.b_star_e_h == pytest.approx(
        asymptotics.rate_success_exponent_dflec(profile, 0.2)
    )
    assert bounds.b_kl == pytest.approx(asymptotics.rate_success_exponent_pflec(profile, 0.05))


@pytest.mark.parametrize("eps", [0.0, 1.0, -0.1])
def test_randomness_bounds_invalid_eps(profile: RenyiProfile, eps: float):
    """
    arrange: An error level outside (0, 1).
    act: Bound the randomness rates.
    assert: A ParameterError is raised.
    """
    with pytest.raises(ParameterError) as exc_info:
        randomness.randomness_bounds(profile, eps, 0.1)

    assert "must lie in (0, 1)" in str(exc_info.value)
