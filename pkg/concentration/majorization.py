#  Copyright 2025 Canonical Ltd.
#  See LICENSE file for licensing details.

"""Module for the majorization order on spectra and LOCC transformability."""
import bisect
import itertools
import logging
import math
from typing import Iterable, Optional

from concentration.spectra import WeightedSpectrum

logger = logging.getLogger(__name__)

PREFIX_TOLERANCE = 1e-12


def _compensated_cumsum(terms: Iterable[float]) -> list[float]:
    """Running sums with Neumaier compensation.

    Args:
        terms: The summands.

    Returns:
        The compensated prefix sums.
    """
    total = 0.0
    compensation = 0.0
    sums = []
    for term in terms:
        running = total + term
        if abs(total) >= abs(term):
            compensation += (total - running) + term
        else:
            compensation += (term - running) + total
        total = running
        sums.append(total + compensation)
    return sums


class _PrefixFunction:
    """Descending prefix sums k -> sum of the k largest eigenvalues, linear between runs."""

    def __init__(self, sp: WeightedSpectrum):
        """Precompute run boundaries and masses.

        Args:
            sp: The spectrum.
        """
        self._values = [float(v) for v in sp.values]
        self.boundaries = list(itertools.accumulate(sp.multiplicities))
        self._masses = _compensated_cumsum(
            v * m for v, m in zip(self._values, sp.multiplicities)
        )

    def __call__(self, k: int) -> float:
        """Evaluate the prefix sum of the k largest eigenvalues.

        Args:
            k: The number of eigenvalues, zero padding beyond the dimension.

        Returns:
            The prefix sum.
        """
        if k <= 0:
            return 0.0
        if k >= self.boundaries[-1]:
            return self._masses[-1]
        run = bisect.bisect_left(self.boundaries, k)
        start = self.boundaries[run - 1] if run > 0 else 0
        below = self._masses[run - 1] if run > 0 else 0.0
        return below + (k - start) * self._values[run]


def prefix_sums(sp: WeightedSpectrum, ks: Iterable[int]) -> list[float]:
    """Evaluate descending prefix sums at the requested positions.

    Args:
        sp: The spectrum.
        ks: The prefix lengths.

    Returns:
        The sums of the k largest eigenvalues for each k.
    """
    prefix = _PrefixFunction(sp)
    return [prefix(k) for k in ks]


def first_violation(
    p: WeightedSpectrum, q: WeightedSpectrum, tolerance: float = PREFIX_TOLERANCE
) -> Optional[int]:
    """Find the first prefix length at which p fails to dominate q.

    Both prefix functions are linear between the union of their run boundaries, so comparing at
    those boundaries decides the whole order.

    Args:
        p: The candidate majorizing spectrum.
        q: The candidate majorized spectrum.
        tolerance: The absolute slack allowed on each comparison.

    Returns:
        The 1-based prefix length of the first violation, or None if p majorizes q.
    """
    prefix_p = _PrefixFunction(p)
    prefix_q = _PrefixFunction(q)
    breakpoints = sorted(set(prefix_p.boundaries) | set(prefix_q.boundaries))
    previous, previous_gap = 0, 0.0
    for point in breakpoints:
        gap = prefix_p(point) - prefix_q(point)
        if gap < -tolerance:
            slope = (gap - previous_gap) / (point - previous)
            offset = math.floor((-tolerance - previous_gap) / slope) + 1
            return min(previous + max(offset, 1), point)
        previous, previous_gap = point, gap
    return None


def majorizes(
    p: WeightedSpectrum, q: WeightedSpectrum, tolerance: float = PREFIX_TOLERANCE
) -> bool:
    """Check whether p majorizes q.

    Args:
        p: The candidate majorizing spectrum.
        q: The candidate majorized spectrum.
        tolerance: The absolute slack allowed on each prefix comparison.

    Returns:
        True if every descending prefix sum of p dominates that of q.
    """
    return first_violation(p, q, tolerance=tolerance) is None


def locc_transformable(
    source: WeightedSpectrum, target: WeightedSpectrum, tolerance: float = PREFIX_TOLERANCE
) -> bool:
    """Check whether a pure state converts deterministically into another by LOCC.

    Args:
        source: The Schmidt spectrum of the initial state.
        target: The Schmidt spectrum of the desired state.
        tolerance: The absolute slack allowed on each prefix comparison.

    Returns:
        True if the target spectrum majorizes the source spectrum.
    """
    verdict = majorizes(target, source, tolerance=tolerance)
    logger.debug("LOCC transformation %s", "possible" if verdict else "impossible")
    return verdict
