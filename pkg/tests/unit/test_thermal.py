#  Copyright 2025 Canonical Ltd.
#  See LICENSE file for licensing details.

"""Unit tests for the thermal module."""
import math

import numpy as np
import pytest

from concentration import asymptotics, spectra, thermal
from concentration.thermal import PartitionFunction, PartitionFunctionError

TWO_LEVELS = [(0.0, 1), (1.0, 1)]


def gibbs_spectrum(beta0: float) -> spectra.WeightedSpectrum:
    """Build the spectrum proportional to e^{beta0 E} of the two-level chain.

    Args:
        beta0: The inverse temperature.

    Returns:
        The single-site spectrum.
    """
    weight = 1.0 / (1.0 + math.exp(beta0))
    return spectra.from_values([weight, 1.0 - weight])


@pytest.mark.parametrize("beta0", [0.5, 1.0, -2.0])
def test_two_level_profile_matches_spectrum(beta0: float):
    """
    arrange: The two-level chain at an inverse temperature.
    act: Build the profile from the partition function.
    assert: It equals the i.i.d. profile of the single-site Gibbs spectrum.
    """
    pf = PartitionFunction.from_levels(TWO_LEVELS)
    sp = gibbs_spectrum(beta0)

    profile = thermal.profile_from_partition(pf, beta0)

    for s in np.linspace(0.0, 5.0, 51):
        assert profile.psi(s) == pytest.approx(spectra.renyi_psi(sp, s), abs=1e-12)
        assert profile.derivative(s) == pytest.approx(
            spectra.renyi_psi_derivatives(sp, s)[0], abs=1e-12
        )
    assert profile.h_infinity == pytest.approx(-math.log(sp.max_value), abs=1e-12)


def test_single_level_profile_vanishes():
    """
    arrange: A single nondegenerate level.
    act: Build the profile at beta0 = 1.3.
    assert: psi vanishes identically.
    """
    profile = thermal.profile_from_partition(PartitionFunction.from_levels([(2.0, 1)]), 1.3)

    for s in (0.0, 0.5, 2.0, 10.0):
        assert profile.psi(s) == pytest.approx(0.0, abs=1e-12)


def test_infinite_temperature_profile():
    """
    arrange: Levels with total degeneracy 5.
    act: Build the profile at beta0 = 0.
    assert: psi(s) = (1 - s) log 5.
    """
    pf = PartitionFunction.from_levels([(0.0, 2), (3.0, 3)])

    profile = thermal.profile_from_partition(pf, 0.0)

    for s in (0.0, 0.5, 2.0):
        assert profile.psi(s) == pytest.approx((1 - s) * math.log(5), abs=1e-12)


def test_infinite_temperature_rates():
    """
    arrange: The two-level chain at beta0 = 0.
    act: Evaluate the rates at r = 0.
    assert: Every rate is log 2.
    """
    rates = thermal.thermal_rates(PartitionFunction.from_levels(TWO_LEVELS), 0.0, 0.0)

    for value in (rates.b_const, rates.b_fail, rates.b_succ_p, rates.b_succ_d):
        assert value == pytest.approx(math.log(2), abs=1e-9)
    assert rates.b_const_bracket == pytest.approx((math.log(2), math.log(2)), abs=1e-9)
    assert rates.r_half == pytest.approx(0.0, abs=1e-12)


def test_constant_rate_is_entropy():
    """
    arrange: The two-level chain at beta0 = 1.
    act: Evaluate the constant-error rate.
    assert: It equals the entropy of the single-site Gibbs spectrum.
    """
    rates = thermal.thermal_rates(PartitionFunction.from_levels(TWO_LEVELS), 1.0, 0.05)

    assert rates.b_const == pytest.approx(spectra.entropy(gibbs_spectrum(1.0)), abs=1e-9)
    low, high = rates.b_const_bracket
    assert low == pytest.approx(rates.b_const, abs=1e-5)
    assert high == pytest.approx(rates.b_const, abs=1e-5)


def test_thermal_rates_match_iid_rates():
    """
    arrange: The two-level chain at beta0 = 1 and its single-site spectrum.
    act: Evaluate the exponent-dependent rates both ways.
    assert: They agree.
    """
    r = 0.05
    profile = asymptotics.profile_from_spectrum(gibbs_spectrum(1.0))

    rates = thermal.thermal_rates(PartitionFunction.from_levels(TWO_LEVELS), 1.0, r)

    assert rates.b_fail == pytest.approx(asymptotics.rate_failure_exponent(profile, r), abs=1e-8)
    assert rates.b_succ_p == pytest.approx(
        asymptotics.rate_success_exponent_pflec(profile, r), abs=1e-8
    )
    assert rates.b_succ_d == pytest.approx(
        asymptotics.rate_success_exponent_dflec(profile, r), abs=1e-8
    )


@pytest.mark.parametrize("beta0", [0.3, 1.0, 2.5])
def test_r_half_is_dflec_threshold(beta0: float):
    """
    arrange: The two-level chain.
    act: Compare r_half with the threshold of the derived profile.
    assert: They agree.
    """
    pf = PartitionFunction.from_levels(TWO_LEVELS)

    expected = asymptotics.dflec_threshold(thermal.profile_from_partition(pf, beta0))

    assert thermal.r_half(pf, beta0) == pytest.approx(expected, abs=1e-9)


def test_table_partition_function():
    """
    arrange: Xi of the two-level chain tabulated at 2001 points on [0, 2].
    act: Evaluate the constant-error rate at beta0 = 1.
    assert: It matches the closed form.
    """
    betas = np.linspace(0.0, 2.0, 2001)
    xis = np.log1p(np.exp(betas))
    pf = PartitionFunction.from_table(list(betas), list(xis))

    rates = thermal.thermal_rates(pf, 1.0, 0.0)

    assert rates.b_const == pytest.approx(spectra.entropy(gibbs_spectrum(1.0)), abs=1e-6)


def test_table_outside_range():
    """
    arrange: A tabulated partition function on [0, 2].
    act: Evaluate it at beta = 3.
    assert: A PartitionFunctionError is raised.
    """
    pf = PartitionFunction.from_table([0.0, 1.0, 2.0], [0.0, 0.5, 1.5])

    with pytest.raises(PartitionFunctionError) as exc_info:
        pf.xi(3.0)

    assert "outside the tabulated range" in str(exc_info.value)


@pytest.mark.parametrize(
    "betas, xis, message",
    [
        pytest.param([0.0, 1.0], [0.0, 1.0], "at least three", id="too short"),
        pytest.param([0.0, 1.0, 1.0], [0.0, 1.0, 1.0], "distinct", id="repeated beta"),
        pytest.param([0.0, 1.0, 2.0], [0.0, 1.0, 1.5], "not convex", id="concave"),
    ],
)
def test_invalid_table(betas: list[float], xis: list[float], message: str):
    """
    arrange: An invalid table.
    act: Build the partition function.
    assert: A PartitionFunctionError is raised.
    """
    with pytest.raises(PartitionFunctionError) as exc_info:
        PartitionFunction.from_table(betas, xis)

    assert message in str(exc_info.value)


@pytest.mark.parametrize(
    "levels, message",
    [
        pytest.param([], "At least one", id="no level"),
        pytest.param([(0.0, 1), (1.0, 0)], "positive", id="zero degeneracy"),
    ],
)
def test_invalid_levels(levels: list[tuple[float, int]], message: str):
    """
    arrange: Invalid energy levels.
    act: Build the partition function.
    assert: A PartitionFunctionError is raised.
    """
    with pytest.raises(PartitionFunctionError) as exc_info:
        PartitionFunction.from_levels(levels)

    assert message in str(exc_info.value)


@pytest.mark.parametrize("beta0", [3.0, -1.0])
def test_beta0_outside_table(beta0: float):
    """
    arrange: A tabulated partition function on [0, 2].
    act: Build the profile at an inverse temperature outside the table.
    assert: A PartitionFunctionError is raised.
    """
    pf = PartitionFunction.from_table([0.0, 1.0, 2.0], [0.0, 0.5, 1.5])

    with pytest.raises(PartitionFunctionError) as exc_info:
        thermal.profile_from_partition(pf, beta0)

    assert "outside the partition function range" in str(exc_info.value)
