#  Copyright 2025 Canonical Ltd.
#  See LICENSE file for licensing details.

"""Module for a quick invariant suite exercising every computational module."""
import logging
import math
from typing import Callable

import numpy as np
from pydantic import BaseModel

from concentration import (
    asymptotics,
    info_spectrum,
    large_deviations,
    majorization,
    protocols,
    randomness,
    spectra,
    thermal,
)
from concentration.spectra import WeightedSpectrum

logger = logging.getLogger(__name__)

EXACT_TOLERANCE = 1e-12
LEGENDRE_TOLERANCE = 1e-8
TWO_LETTER_BASE = (0.75, 0.25)
TWO_LETTER_ENTROPY = 0.562335144618808
SIZE_GRID_POINTS = 400


class SelfTestCheck(BaseModel):
    """The outcome of one self-test check.

    Attributes:
        name: What was checked.
        passed: Whether the check passed.
        detail: The worst deviation observed, or a short note.
    """

    name: str
    passed: bool
    detail: str


def _random_spectrum(rng: np.random.Generator, max_letters: int) -> WeightedSpectrum:
    """Draw a random spectrum.

    Args:
        rng: The random generator.
        max_letters: The largest number of eigenvalues.

    Returns:
        A spectrum of 2 to max_letters eigenvalues.
    """
    letters = int(rng.integers(2, max_letters + 1))
    return spectra.from_values(list(rng.dirichlet(np.ones(letters))))


def _grid_search_size(eigenvalues: np.ndarray, x: float) -> int:
    """Maximize floor((1 - h(x')) / x') over a dense grid of levels x' >= x.

    Levels below x fail more often, so only x' >= x compete with the protocol derived from x.

    Args:
        eigenvalues: The expanded spectrum.
        x: The level.

    Returns:
        The largest size found on the grid.
    """
    levels = np.concatenate(([x], np.linspace(x, eigenvalues.max(), SIZE_GRID_POINTS)))
    failures = np.maximum(eigenvalues[None, :] - levels[:, None], 0.0).sum(axis=1)
    sizes = np.floor((1.0 - failures) / levels + protocols.FLOOR_SNAP_TOLERANCE)
    return int(sizes.max())


def _check_pflec_oracle(rng: np.random.Generator) -> SelfTestCheck:
    """Compare the probabilistic protocol with brute-force failure and size searches.

    Args:
        rng: The random generator.

    Returns:
        The check.
    """
    worst = 0.0
    size_mismatches = 0
    for _ in range(1000):
        sp = _random_spectrum(rng, 8)
        eigenvalues = sp.expanded()
        for x in rng.uniform(0.0, sp.max_value, size=20):
            report = protocols.optimal_pflec(sp, x)
            deviation = abs(
                protocols.failure_function(sp, x) - protocols.pflec_failure_oracle(sp, x)
            )
            worst = max(worst, deviation)
            if report.size != _grid_search_size(eigenvalues, x):
                size_mismatches += 1
    return SelfTestCheck(
        name="pflec failure oracle",
        passed=worst <= EXACT_TOLERANCE and size_mismatches == 0,
        detail=f"{worst:.3e}, {size_mismatches} size mismatches",
    )


def _check_dflec_oracle(rng: np.random.Generator) -> SelfTestCheck:
    """Certify the deterministic optimizer against a sampled search.

    Args:
        rng: The random generator.

    Returns:
        The check.
    """
    worst = -math.inf
    majorizing = True
    for _ in range(500):
        sp = _random_spectrum(rng, 6)
        for size in range(1, sp.dimension + 1):
            fidelity = protocols.dflec_max_fidelity(sp, size).fidelity
            oracle = protocols.dflec_fidelity_oracle(sp, size, samples=50, rng=rng)
            worst = max(worst, oracle - fidelity)
            majorizing &= majorization.majorizes(protocols.flattened_majorizer(sp, size), sp)
    return SelfTestCheck(
        name="dflec optimizer certification",
        passed=worst <= 1e-9 and majorizing,
        detail=f"oracle excess {worst:.3e}",
    )


def _check_constant_rate(_: np.random.Generator) -> SelfTestCheck:
    """Compare the finite-n constant-error rate with the entropy.

    Returns:
        The check.
    """
    base = spectra.from_values(list(TWO_LETTER_BASE))
    n = 400
    rate = info_spectrum.optimal_rate_n(spectra.iid_product(base, n), n, 0.1)
    deviation = abs(float(rate) - TWO_LETTER_ENTROPY)
    return SelfTestCheck(
        name="constant-error rate at n=400", passed=deviation < 0.05, detail=f"{deviation:.3e}"
    )


def _check_legendre(_: np.random.Generator) -> SelfTestCheck:
    """Compare the closed-form exponents with the tail exponents of -log p.

    Returns:
        The check.
    """
    base = spectra.from_values(list(TWO_LETTER_BASE))
    profile = asymptotics.profile_from_spectrum(base)
    mgf = large_deviations.from_profile(profile)
    worst = 0.0
    for a in np.linspace(profile.h_infinity + 0.01, profile.top - 0.01, 100):
        tails = large_deviations.tail_exponents(mgf, a)
        zeta = float(asymptotics.zeta_asymptotic(profile, a, clamp=False))
        zeta_c = float(asymptotics.zeta_c_asymptotic(profile, a))
        worst = max(worst, abs(zeta - float(tails.upper_ge)), abs(zeta_c - float(tails.lower_le)))
    return SelfTestCheck(
        name="legendre consistency", passed=worst <= LEGENDRE_TOLERANCE, detail=f"{worst:.3e}"
    )


def _check_thermal(_: np.random.Generator) -> SelfTestCheck:
    """Compare the two-level thermal profile with the direct i.i.d. profile.

    Returns:
        The check.
    """
    pf = thermal.PartitionFunction.from_levels([(0.0, 1), (1.0, 1)])
    weight = 1.0 / (1.0 + math.e)
    base = spectra.from_values([weight, 1.0 - weight])
    direct = asymptotics.profile_from_spectrum(base)
    derived = thermal.profile_from_partition(pf, 1.0)
    worst = max(abs(derived.psi(s) - direct.psi(s)) for s in np.linspace(0.0, 5.0, 50))
    return SelfTestCheck(
        name="thermal identity", passed=worst <= EXACT_TOLERANCE, detail=f"{worst:.3e}"
    )


def _check_bernoulli(_: np.random.Generator) -> SelfTestCheck:
    """Compare the Bernoulli rate function with the analytic divergence.

    Returns:
        The check.
    """
    q = 0.5
    mgf = large_deviations.bernoulli(q)
    worst = 0.0
    for rate in np.linspace(0.01, 0.99, 50):
        divergence = rate * math.log(rate / q) + (1 - rate) * math.log((1 - rate) / (1 - q))
        worst = max(worst, abs(float(large_deviations.rate_function(mgf, rate)) - divergence))
    return SelfTestCheck(
        name="bernoulli rate function", passed=worst <= 1e-8, detail=f"{worst:.3e}"
    )


def _check_duality(rng: np.random.Generator) -> SelfTestCheck:
    """Check the Hellinger/fidelity identities on random partitions.

    Args:
        rng: The random generator.

    Returns:
        The check.
    """
    worst = 0.0
    sandwich = True
    for _ in range(1000):
        sp = _random_spectrum(rng, 8)
        bucket_count = int(rng.integers(1, sp.dimension + 1))
        report = randomness.duality_check(
            sp, randomness.random_partition(sp, bucket_count, rng)
        )
        worst = max(worst, report.square_residual, report.complement_residual)
        sandwich &= report.sandwich_holds
    return SelfTestCheck(
        name="randomness duality",
        passed=worst <= EXACT_TOLERANCE and sandwich,
        detail=f"{worst:.3e}",
    )


def _random_sequence_pair(
    rng: np.random.Generator, n_range: list[int]
) -> tuple[info_spectrum.SpectrumSequence, info_spectrum.SpectrumSequence]:
    """Draw two unrelated spectrum sequences sharing a dimension at every n.

    Args:
        rng: The random generator.
        n_range: The values of n.

    Returns:
        The sequences rho_n and sigma_n, each of dimension n + 1.
    """
    rho, sigma = {}, {}
    for n in n_range:
        rho[n] = spectra.from_values(list(rng.dirichlet(np.ones(n + 1))))
        sigma[n] = spectra.from_values(list(rng.dirichlet(np.ones(n + 1))))
    return (
        info_spectrum.SpectrumSequence.from_spectra(rho),
        info_spectrum.SpectrumSequence.from_spectra(sigma),
    )


def _check_exact_inequality(rng: np.random.Generator) -> SelfTestCheck:
    """Check zeta^c_n(a) <= eta_n(a) + a at every n on random sequence pairs.

    Args:
        rng: The random generator.

    Returns:
        The check.
    """
    checked = failed = 0
    for _ in range(100):
        seq_rho, seq_sigma = _random_sequence_pair(rng, [2, 4, 6])
        report = info_spectrum.inequality_suite(
            seq_rho, seq_sigma, [-0.5, 0.0, 0.25, 0.5, 1.0], [0.1]
        )
        exact = [check for check in report.checks if check.n is not None]
        checked += len(exact)
        failed += sum(not check.passed for check in exact)
    return SelfTestCheck(
        name="projection exponent bound",
        passed=failed == 0,
        detail=f"{failed} of {checked} checks failed",
    )


def _check_regime_boundary(_: np.random.Generator) -> SelfTestCheck:
    """Check continuity of the deterministic success exponent at its threshold.

    Returns:
        The check.
    """
    profile = asymptotics.profile_from_spectrum(spectra.from_values(list(TWO_LETTER_BASE)))
    threshold = asymptotics.dflec_threshold(profile)
    gap = abs(
        asymptotics.rate_success_exponent_pflec(profile, threshold)
        - (2.0 * profile.psi(0.5) + threshold)
    )
    return SelfTestCheck(name="regime boundary", passed=gap <= 1e-9, detail=f"{gap:.3e}")


CHECKS: tuple[Callable[[np.random.Generator], SelfTestCheck], ...] = (
    _check_pflec_oracle,
    _check_dflec_oracle,
    _check_constant_rate,
    _check_legendre,
    _check_thermal,
    _check_bernoulli,
    _check_duality,
    _check_exact_inequality,
    _check_regime_boundary,
)


def run_selftest(seed: int) -> list[SelfTestCheck]:
    """Run every check with a seeded generator.

    Args:
        seed: The seed.

    Returns:
        The outcome of each check, in a fixed order.
    """
    rng = np.random.default_rng(seed)
    results = []
    for check in CHECKS:
        result = check(rng)
        if not result.passed:
            logger.warning("Self-test check %s failed: %s", result.name, result.detail)
        results.append(result)
    return results
