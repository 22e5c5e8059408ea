#  Copyright 2025 Canonical Ltd.
#  See LICENSE file for licensing details.

"""Unit tests for the protocols module."""
import math

import numpy as np
import pytest

from concentration import majorization, protocols, spectra
from concentration.protocols import ProtocolError
from concentration.spectra import WeightedSpectrum
from tests.unit.helpers import random_spectrum


@pytest.mark.parametrize(
    "entries, x, expected_size, expected_failure",
    [
        pytest.param([(0.4, 2), (0.2, 1)], 0.25, 2, 0.3, id="two values above the level"),
        pytest.param([(0.7, 1), (0.3, 1)], 0.5, 1, 0.2, id="one value above the level"),
        pytest.param([(0.7, 1), (0.3, 1)], 0.7, 1, 0.0, id="level at the largest value"),
        pytest.param([(0.7, 1), (0.3, 1)], 0.1, 2, 0.8, id="level below every value"),
    ],
)
def test_optimal_pflec(
    entries: list[tuple[float, int]], x: float, expected_size: int, expected_failure: float
):
    """
    arrange: A spectrum and a level x.
    act: Call optimal_pflec.
    assert: The size is floor((1 - h(x)) / x) and the failure is h(x).
    """
    report = protocols.optimal_pflec(spectra.from_entries(entries), x)

    assert report.size == expected_size
    assert math.isclose(report.failure, expected_failure, abs_tol=1e-12)
    assert math.isclose(report.fidelity, 1 - expected_failure, abs_tol=1e-12)
    assert report.threshold_x == x


def test_optimal_pflec_snaps_to_integer():
    """
    arrange: The uniform spectrum of dimension 3 and the level 1/3.
    act: Call optimal_pflec.
    assert: The size is 3 despite rounding in (1 - h) / x.
    """
    report = protocols.optimal_pflec(WeightedSpectrum.uniform(3), 1 / 3)

    assert report.size == 3
    assert report.failure == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize(
    "x, message",
    [
        pytest.param(0.0, "positive", id="zero"),
        pytest.param(-0.1, "positive", id="negative"),
        pytest.param(0.8, "exceeds the largest eigenvalue", id="above the largest value"),
    ],
)
def test_optimal_pflec_invalid_level(x: float, message: str):
    """
    arrange: A level outside (0, v_max].
    act: Call optimal_pflec.
    assert: A ProtocolError is raised.
    """
    with pytest.raises(ProtocolError) as exc_info:
        protocols.optimal_pflec(spectra.from_values([0.7, 0.3]), x)

    assert message in str(exc_info.value)


def test_failure_function_edges():
    """
    arrange: A spectrum.
    act: Evaluate h at 0, at a negative level and above every value.
    assert: h(0) = 1, negative levels are rejected and h vanishes above v_max.
    """
    sp = spectra.from_values([0.7, 0.3])

    assert protocols.failure_function(sp, 0.0) == 1.0
    assert protocols.failure_function(sp, 0.9) == 0.0
    with pytest.raises(ProtocolError):
        protocols.failure_function(sp, -1e-3)


def test_failure_function_matches_oracle(rng: np.random.Generator):
    """
    arrange: Random spectra and random levels.
    act: Compare h with the eigenvalue-clipping oracle.
    assert: They agree to 1e-12.
    """
    for _ in range(50):
        sp = spectra.iid_product(random_spectrum(rng, 4), int(rng.integers(1, 5)))
        for x in rng.uniform(0.0, sp.max_value, size=10):
            assert math.isclose(
                protocols.failure_function(sp, x),
                protocols.pflec_failure_oracle(sp, x),
                abs_tol=1e-12,
            )


def test_pflec_sweep_is_monotone(rng: np.random.Generator):
    """
    arrange: A random spectrum and an increasing grid of levels.
    act: Sweep the optimal probabilistic protocol.
    assert: Failure and size are nonincreasing in the level.
    """
    sp = spectra.iid_product(random_spectrum(rng, 3), 6)
    xs = np.linspace(sp.max_value / 100, sp.max_value, 60)

    reports = protocols.pflec_sweep(sp, xs)

    failures = [report.failure for report in reports]
    sizes = [report.size for report in reports]
    assert all(later <= earlier + 1e-15 for earlier, later in zip(failures, failures[1:]))
    assert all(later <= earlier for earlier, later in zip(sizes, sizes[1:]))


def test_pflec_failure_oracle_dimension_cap():
    """
    arrange: A spectrum with a dimension above the oracle limit.
    act: Call the oracle.
    assert: A ProtocolError is raised.
    """
    with pytest.raises(ProtocolError):
        protocols.pflec_failure_oracle(WeightedSpectrum.uniform(10**5 + 1), 0.1)


@pytest.mark.parametrize(
    "values, size, expected_failure, expected_threshold",
    [
        pytest.param([0.7, 0.3], 2, 0.4, 0.3, id="size two"),
        pytest.param([0.7, 0.3], 1, 0.0, 0.7, id="size one"),
        pytest.param([0.25] * 4, 4, 0.0, 0.25, id="uniform"),
        pytest.param([0.5, 0.3, 0.2], 3, 0.4, 0.2, id="full rank"),
        pytest.param([0.5, 0.3, 0.2], 2, 0.0, 0.5, id="largest value fits"),
    ],
)
def test_min_failure_for_size(
    values: list[float], size: int, expected_failure: float, expected_threshold: float
):
    """
    arrange: A spectrum and a target size.
    act: Call min_failure_for_size.
    assert: The optimal failure and level are found.
    """
    report = protocols.min_failure_for_size(spectra.from_values(values), size)

    assert report.size == size
    assert math.isclose(report.failure, expected_failure, abs_tol=1e-12)
    assert math.isclose(report.threshold_x, expected_threshold, rel_tol=1e-12)


def test_min_failure_for_size_inverts_optimal_pflec(rng: np.random.Generator):
    """
    arrange: Random spectra.
    act: Find the optimal level for each size and evaluate the protocol there.
    assert: The protocol at that level reaches at least the requested size.
    """
    for _ in range(30):
        sp = spectra.iid_product(random_spectrum(rng, 3), int(rng.integers(1, 4)))
        for size in range(1, sp.dimension + 1):
            report = protocols.min_failure_for_size(sp, size)
            assert protocols.optimal_pflec(sp, report.threshold_x).size >= size


@pytest.mark.parametrize("size", [0, 3])
def test_min_failure_for_size_invalid(size: int):
    """
    arrange: A rank-2 spectrum and a size outside [1, 2].
    act: Call min_failure_for_size and dflec_max_fidelity.
    assert: A ProtocolError is raised.
    """
    sp = spectra.from_values([0.7, 0.3])

    with pytest.raises(ProtocolError):
        protocols.min_failure_for_size(sp, size)
    with pytest.raises(ProtocolError):
        protocols.dflec_max_fidelity(sp, size)


@pytest.mark.parametrize(
    "values, size, expected_fidelity",
    [
        pytest.param(
            [0.7, 0.3], 2, (math.sqrt(0.7) + math.sqrt(0.3)) ** 2 / 2, id="qubit to ebit"
        ),
        pytest.param(
            [0.6, 0.2, 0.2], 2, (math.sqrt(0.6) + math.sqrt(0.4)) ** 2 / 2, id="merge the tail"
        ),
        pytest.param([0.25] * 4, 4, 1.0, id="already maximally entangled"),
        pytest.param([0.7, 0.3], 1, 1.0, id="trivial target"),
    ],
)
def test_dflec_max_fidelity(values: list[float], size: int, expected_fidelity: float):
    """
    arrange: A spectrum and a target size.
    act: Call dflec_max_fidelity.
    assert: The optimal fidelity is returned and the failure is its complement.
    """
    report = protocols.dflec_max_fidelity(spectra.from_values(values), size)

    assert math.isclose(report.fidelity, expected_fidelity, rel_tol=1e-12)
    assert math.isclose(report.failure, 1 - report.fidelity, abs_tol=1e-15)
    assert report.threshold_x is None


def test_dflec_matches_oracle(rng: np.random.Generator):
    """
    arrange: Random spectra with few distinct values.
    act: Compare the optimizer with the sampled majorizer search.
    assert: The search finds but never beats the optimum and the optimizer majorizes p.
    """
    for _ in range(20):
        sp = random_spectrum(rng, 6)
        for size in range(1, sp.dimension + 1):
            fidelity = protocols.dflec_max_fidelity(sp, size).fidelity
            oracle = protocols.dflec_fidelity_oracle(sp, size, samples=50, rng=rng)
            assert math.isclose(oracle, fidelity, abs_tol=1e-9)
            assert majorization.majorizes(protocols.flattened_majorizer(sp, size), sp)


def test_dflec_oracle_rejects_large_spectra():
    """
    arrange: A spectrum with nine distinct values.
    act: Call the oracle.
    assert: A ProtocolError is raised.
    """
    sp = spectra.from_values([v / 45 for v in range(1, 10)])

    with pytest.raises(ProtocolError) as exc_info:
        protocols.dflec_fidelity_oracle(sp, 2, samples=1)

    assert "distinct values" in str(exc_info.value)


def test_dflec_properties(rng: np.random.Generator):
    """
    arrange: Random product spectra.
    act: Evaluate both protocol families for every size.
    assert: Deterministic fidelity beats probabilistic success, L F(L) is nondecreasing and the
        flattened majorizer majorizes the spectrum.
    """
    for _ in range(20):
        sp = spectra.iid_product(random_spectrum(rng, 3), int(rng.integers(1, 4)))
        weighted = []
        for size in range(1, sp.dimension + 1):
            fidelity = protocols.dflec_max_fidelity(sp, size).fidelity
            success = 1 - protocols.min_failure_for_size(sp, size).failure
            assert fidelity >= success - 1e-9
            weighted.append(size * fidelity)
            majorizer = protocols.flattened_majorizer(sp, size)
            assert majorization.majorizes(majorizer, sp)
            assert math.isclose(
                protocols.overlap_fidelity(majorizer.expanded(), size), fidelity, rel_tol=1e-9
            )
        assert all(later >= earlier - 1e-9 for earlier, later in zip(weighted, weighted[1:]))


def test_overlap_fidelity():
    """
    arrange: A probability vector in arbitrary order.
    act: Evaluate the overlap fidelity for two slots.
    assert: The two largest entries are used.
    """
    result = protocols.overlap_fidelity(np.array([0.1, 0.5, 0.4]), 2)

    assert math.isclose(result, (math.sqrt(0.5) + math.sqrt(0.4)) ** 2 / 2)


def test_random_majorizers(rng: np.random.Generator):
    """
    arrange: A spectrum.
    act: Draw random majorizers.
    assert: Every sample is descending, normalized and majorizes the spectrum.
    """
    sp = spectra.from_values([0.4, 0.3, 0.2, 0.1])

    samples = protocols.random_majorizers(sp, 25, rng, transfers=6)

    assert len(samples) == 25
    for q in samples:
        assert np.all(np.diff(q) <= 0)
        assert math.isclose(float(np.sum(q)), 1.0, abs_tol=1e-12)
        assert np.all(np.cumsum(q) >= np.cumsum(sp.expanded()) - 1e-12)


def test_random_majorizers_default_transfers_spread(rng: np.random.Generator):
    """
    arrange: The uniform spectrum of dimension 4.
    act: Draw random majorizers with the default number of transfers.
    assert: Some sample concentrates most of the mass on one entry.
    """
    samples = protocols.random_majorizers(WeightedSpectrum.uniform(4), 100, rng)

    assert max(float(q[0]) for q in samples) > 0.8


def test_random_majorizers_single_value(rng: np.random.Generator):
    """
    arrange: A pure state.
    act: Draw random majorizers.
    assert: Every sample is the spectrum itself.
    """
    samples = protocols.random_majorizers(spectra.from_values([1.0]), 3, rng)

    assert [q.tolist() for q in samples] == [[1.0]] * 3


def test_fidelity_bound():
    """
    arrange: The spectrum (0.7, 0.3) with Tr T = M = 2.
    act: Evaluate the bound.
    assert: It equals sqrt(0.7) + sqrt(0.3).
    """
    result = protocols.fidelity_bound(spectra.from_values([0.7, 0.3]), 2, 2)

    assert math.isclose(result, math.sqrt(0.7) + math.sqrt(0.3), rel_tol=1e-12)


def test_fidelity_bound_dominates_majorizers(rng: np.random.Generator):
    """
    arrange: Random spectra and random majorizers of them.
    act: Compare Tr sqrt(q) T, with T the top-M projection, against the bound.
    assert: The bound is never exceeded.
    """
    for _ in range(30):
        sp = random_spectrum(rng, 6)
        bucket_count = int(rng.integers(1, sp.dimension + 1))
        bound = protocols.fidelity_bound(sp, bucket_count, bucket_count)
        candidates = [sp.expanded(), *protocols.random_majorizers(sp, 20, rng)]
        for q in candidates:
            overlap = float(np.sum(np.sqrt(np.sort(q)[::-1][:bucket_count])))
            assert overlap <= bound + 1e-9


@pytest.mark.parametrize(
    "trace_t, bucket_count, message",
    [
        pytest.param(2, 0, "M must be positive", id="no buckets"),
        pytest.param(1, 2, "must be at least", id="projection too small"),
    ],
)
def test_fidelity_bound_invalid(trace_t: int, bucket_count: int, message: str):
    """
    arrange: Invalid Tr T and M.
    act: Evaluate the bound.
    assert: A ProtocolError is raised.
    """
    with pytest.raises(ProtocolError) as exc_info:
        protocols.fidelity_bound(spectra.from_values([0.7, 0.3]), trace_t, bucket_count)

    assert message in str(exc_info.value)
