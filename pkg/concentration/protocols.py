#  Copyright 2025 Canonical Ltd.
#  See LICENSE file for licensing details.

"""Module for the exact finite-size performance of fixed-length entanglement concentration.

Probabilistic protocols (PFLEC) are judged by their failure probability, deterministic ones
(DFLEC) by the fidelity with a maximally entangled target of size L.
"""
import logging
import math
from typing import Iterable, Optional

import numpy as np
from pydantic import BaseModel, Field
from scipy.special import logsumexp

from concentration import majorization
from concentration.spectra import WeightedSpectrum, from_entries, log_total

logger = logging.getLogger(__name__)

FLOOR_SNAP_TOLERANCE = 1e-9
VALIDITY_TOLERANCE = 1e-12
ORACLE_MAX_DISTINCT_VALUES = 8
ORACLE_MAX_DIMENSION = 10**5
DEFAULT_TRANSFERS_PER_SAMPLE = 32


class ProtocolError(Exception):
    """Raised when a protocol query is invalid."""


class ProtocolReport(BaseModel):
    """The performance of a concentration protocol with a maximally entangled target.

    Attributes:
        size: The Schmidt rank L of the target.
        failure: The failure probability (PFLEC) or the infidelity 1 - fidelity (DFLEC).
        fidelity: The success probability (PFLEC) or the squared overlap with the target (DFLEC).
        threshold_x: The threshold the protocol was derived from, if any.
    """

    size: int = Field(ge=1)
    failure: float = Field(ge=0.0, le=1.0)
    fidelity: float = Field(ge=0.0, le=1.0)
    threshold_x: Optional[float] = None


def _clip_probability(value: float) -> float:
    """Clip rounding noise off a probability.

    Args:
        value: The computed probability.

    Returns:
        The value clipped to [0, 1].
    """
    return min(max(value, 0.0), 1.0)


def failure_function(sp: WeightedSpectrum, x: float) -> float:
    """Compute h(x), the eigenvalue mass exceeding the level x.

    Args:
        sp: The spectrum.
        x: The level, nonnegative.

    Returns:
        sum m max(v - x, 0)

    Raises:
        ProtocolError: If x is negative.
    """
    if x < 0:
        raise ProtocolError(f"The threshold must be nonnegative, got {x}")
    if x == 0:
        return 1.0
    log_values = np.asarray(sp.log_values, dtype=float)
    above = log_values > math.log(x)
    if not np.any(above):
        return 0.0
    # m (v - x) = m v (1 - x / v), evaluated in the log domain
    log_excess = sp.log_masses[above] + np.log1p(-np.exp(math.log(x) - log_values[above]))
    return _clip_probability(math.exp(log_total(log_excess)))


def _snapped_floor(ratio: float, snap: float = FLOOR_SNAP_TOLERANCE) -> int:
    """Floor a ratio, rounding first when it is within `snap` of an integer.

    Args:
        ratio: The ratio to floor.
        snap: The snapping distance.

    Returns:
        The floored integer.
    """
    nearest = round(ratio)
    if abs(ratio - nearest) <= snap:
        return int(nearest)
    return math.floor(ratio)


def optimal_pflec(
    sp: WeightedSpectrum, x: float, snap: float = FLOOR_SNAP_TOLERANCE
) -> ProtocolReport:
    """Compute the optimal probabilistic protocol derived from the level x.

    Args:
        sp: The spectrum.
        x: The level, in (0, v_max].
        snap: Distance to an integer under which (1 - h(x)) / x is rounded before flooring.

    Returns:
        The report with size floor((1 - h(x)) / x) and failure h(x).

    Raises:
        ProtocolError: If x is not in (0, v_max].
    """
    if x <= 0:
        raise ProtocolError(f"The threshold must be positive, got {x}")
    if x > sp.max_value * (1 + VALIDITY_TOLERANCE):
        raise ProtocolError(f"The threshold {x} exceeds the largest eigenvalue {sp.max_value}")
    failure = failure_function(sp, x)
    size = _snapped_floor((1.0 - failure) / x, snap)
    return ProtocolReport(size=size, failure=failure, fidelity=1.0 - failure, threshold_x=x)


def pflec_sweep(
    sp: WeightedSpectrum, xs: Iterable[float], snap: float = FLOOR_SNAP_TOLERANCE
) -> list[ProtocolReport]:
    """Evaluate the optimal probabilistic protocol on a grid of levels.

    Args:
        sp: The spectrum.
        xs: The levels.
        snap: See optimal_pflec.

    Returns:
        One report per level, in the given order.
    """
    return [optimal_pflec(sp, x, snap=snap) for x in xs]


def _check_dimension(sp: WeightedSpectrum, dimension: int) -> None:
    """Reject queries whose size exceeds the spectrum.

    Args:
        sp: The spectrum.
        dimension: The requested size.

    Raises:
        ProtocolError: If the size is outside [1, dimension].
    """
    if dimension < 1:
        raise ProtocolError(f"The target size must be positive, got {dimension}")
    if dimension > sp.dimension:
        raise ProtocolError(
            f"The target size {dimension} exceeds the Schmidt rank {sp.dimension}"
        )


def pflec_failure_oracle(sp: WeightedSpectrum, x: float) -> float:
    """Evaluate min{1 - Tr s | s <= x, s <= rho} by clipping every eigenvalue.

    Args:
        sp: The spectrum.
        x: The level, nonnegative.

    Returns:
        sum over eigenvalues of (s_i - min(s_i, x)).

    Raises:
        ProtocolError: If x is negative or the spectrum is too large to expand.
    """
    if x < 0:
        raise ProtocolError(f"The threshold must be nonnegative, got {x}")
    if sp.dimension > ORACLE_MAX_DIMENSION:
        raise ProtocolError(f"Dimension {sp.dimension} is too large for the oracle")
    eigenvalues = sp.expanded()
    clipped = np.minimum(eigenvalues, x)
    return _clip_probability(math.fsum(eigenvalues - clipped))


def min_failure_for_size(sp: WeightedSpectrum, size: int) -> ProtocolReport:
    """Find the smallest failure probability of a probabilistic protocol of a given size.

    The map x -> (1 - h(x)) / x equals N_k + T_k / x between consecutive distinct values, where
    N_k counts the eigenvalues above the segment and T_k is the mass below it. The largest x
    reaching the size gives the smallest failure, so segments are visited from the top.

    Args:
        sp: The spectrum.
        size: The target size L.

    Returns:
        The report for the optimal level.

    Raises:
        ProtocolError: If the size is outside [1, dimension].
    """
    _check_dimension(sp, size)
    values = sp.values
    if size * sp.max_value <= 1.0:
        return ProtocolReport(size=size, failure=0.0, fidelity=1.0, threshold_x=sp.max_value)
    count_above = 0
    threshold = float(values[-1])
    for k in range(len(values) - 1):
        count_above += sp.multiplicities[k]
        if size <= count_above:
            break
        mass_below = math.exp(log_total(sp.log_masses[k + 1 :]))
        x = mass_below / (size - count_above)
        if values[k + 1] * (1 - VALIDITY_TOLERANCE) <= x <= values[k] * (1 + VALIDITY_TOLERANCE):
            threshold = x
            break
    threshold = min(threshold, sp.max_value)
    failure = failure_function(sp, threshold)
    logger.debug("Size %d reached at threshold %s with failure %s", size, threshold, failure)
    return ProtocolReport(
        size=size, failure=failure, fidelity=1.0 - failure, threshold_x=threshold
    )


def _flattening_candidates(sp: WeightedSpectrum, size: int) -> list[tuple[int, int, float]]:
    """List the admissible keep-top-l / flatten-the-rest majorizers.

    Args:
        sp: The spectrum.
        size: The target size L.

    Returns:
        Tuples (runs kept, eigenvalues kept l, log of the flat level c) whose candidate is a
        descending majorizer of the spectrum.
    """
    log_values = np.asarray(sp.log_values, dtype=float)
    candidates = []
    kept = 0
    for runs in range(len(log_values)):
        if kept >= size:
            break
        log_rest = log_total(sp.log_masses[runs:])
        log_level = log_rest - math.log(size - kept)
        fits_below = runs == 0 or log_level <= log_values[runs - 1] + VALIDITY_TOLERANCE
        fits_above = log_level >= log_values[runs] - VALIDITY_TOLERANCE
        if fits_below and fits_above:
            candidates.append((runs, kept, log_level))
        kept += sp.multiplicities[runs]
    return candidates


def _log_candidate_fidelity(
    sp: WeightedSpectrum, size: int, runs: int, kept: int, log_level: float
) -> float:
    """Evaluate log of (sum of square roots of the candidate's top L entries)^2 / L.

    Args:
        sp: The spectrum.
        size: The target size L.
        runs: The number of runs kept.
        kept: The number of eigenvalues kept.
        log_level: The log of the flat level c.

    Returns:
        The log fidelity of the candidate.
    """
    log_values = np.asarray(sp.log_values[:runs], dtype=float)
    log_roots = list(0.5 * log_values + sp.log_multiplicities[:runs])
    log_roots.append(math.log(size - kept) + 0.5 * log_level)
    return 2.0 * float(logsumexp(log_roots)) - math.log(size)


def _best_candidate(sp: WeightedSpectrum, size: int) -> tuple[int, int, float, float]:
    """Pick the flattened majorizer with the largest fidelity.

    Args:
        sp: The spectrum.
        size: The target size L.

    Returns:
        (runs kept, eigenvalues kept, log flat level, log fidelity).

    Raises:
        ProtocolError: If no admissible candidate exists.
    """
    candidates = _flattening_candidates(sp, size)
    if not candidates:
        raise ProtocolError(f"No admissible flattened majorizer for size {size}")
    scored = [
        (runs, kept, log_level, _log_candidate_fidelity(sp, size, runs, kept, log_level))
        for runs, kept, log_level in candidates
    ]
    return max(scored, key=lambda candidate: candidate[3])


def dflec_max_fidelity(sp: WeightedSpectrum, size: int) -> ProtocolReport:
    """Compute the optimal fidelity of a deterministic protocol with a target of size L.

    The optimum over all majorizers keeps the top l eigenvalues and spreads the remaining mass
    evenly over L - l slots; such a candidate is admissible only when the flat level sits between
    the last kept and the first dropped eigenvalue.

    Args:
        sp: The spectrum.
        size: The target size L.

    Returns:
        The report with the optimal fidelity; failure holds the infidelity.

    Raises:
        ProtocolError: If the size is outside [1, dimension].
    """
    _check_dimension(sp, size)
    runs, kept, log_level, log_fidelity = _best_candidate(sp, size)
    fidelity = _clip_probability(math.exp(log_fidelity))
    logger.debug(
        "Best flattening for size %d keeps %d eigenvalues (%d runs) at level %s",
        size,
        kept,
        runs,
        math.exp(log_level),
    )
    return ProtocolReport(size=size, failure=1.0 - fidelity, fidelity=fidelity)


def flattened_majorizer(sp: WeightedSpectrum, size: int) -> WeightedSpectrum:
    """Build the majorizer attaining the optimal deterministic fidelity.

    Args:
        sp: The spectrum.
        size: The target size L.

    Returns:
        The top eigenvalues of the spectrum followed by L - l copies of the flat level.
    """
    _check_dimension(sp, size)
    runs, kept, log_level, _ = _best_candidate(sp, size)
    entries = sp.entries[:runs] + [(math.exp(log_level), size - kept)]
    return from_entries(entries)


def overlap_fidelity(q: np.ndarray, size: int) -> float:
    """Evaluate (sum of the square roots of the L largest entries)^2 / L.

    Args:
        q: A probability vector.
        size: The target size L.

    Returns:
        The fidelity of the best deterministic conversion of q to a size-L target.
    """
    top = np.sort(np.asarray(q, dtype=float))[::-1][:size]
    return _clip_probability(math.fsum(np.sqrt(np.maximum(top, 0.0))) ** 2 / size)


def random_majorizers(
    sp: WeightedSpectrum,
    count: int,
    rng: np.random.Generator,
    transfers: int = DEFAULT_TRANSFERS_PER_SAMPLE,
) -> list[np.ndarray]:
    """Draw random probability vectors majorizing a spectrum.

    Each sample applies random concentrating transfers: a uniform fraction of the smaller entry
    of a random pair moves to the larger one, which can only raise every descending prefix sum.
    Longer chains reach further into the majorization cone, towards its extreme points.

    Args:
        sp: The spectrum.
        count: The number of samples.
        rng: The random generator.
        transfers: The number of transfers per sample, DEFAULT_TRANSFERS_PER_SAMPLE (32) when
            omitted.

    Returns:
        Descending probability vectors, each majorizing the spectrum.
    """
    base = sp.expanded()
    if base.size < 2:
        return [base.copy() for _ in range(count)]
    samples = []
    for _ in range(count):
        q = base.tolist()
        pairs = rng.integers(0, base.size, size=(transfers, 2))
        fractions = rng.uniform(0.0, 1.0, size=transfers)
        for (donor, receiver), fraction in zip(pairs.tolist(), fractions.tolist()):
            if donor == receiver:
                continue
            if q[donor] > q[receiver]:
                donor, receiver = receiver, donor
            amount = fraction * q[donor]
            q[donor] -= amount
            q[receiver] += amount
        samples.append(np.sort(np.asarray(q))[::-1])
    return samples


def _as_spectrum(q: np.ndarray) -> WeightedSpectrum:
    """Convert a sampled vector to a spectrum, dropping zero entries.

    Args:
        q: A probability vector.

    Returns:
        The spectrum of the positive entries.
    """
    return from_entries([(float(v), 1) for v in q if v > 0])


def dflec_fidelity_oracle(
    sp: WeightedSpectrum, size: int, samples: int, rng: Optional[np.random.Generator] = None
) -> float:
    """Search the majorization cone for a large deterministic fidelity.

    Every keep-top-l / flatten candidate is checked for majorization explicitly, then random
    majorizers are scored as well.

    Args:
        sp: The spectrum, with at most eight distinct values.
        size: The target size L.
        samples: The number of random majorizers to score.
        rng: The random generator, seeded with 42 when omitted.

    Returns:
        The best fidelity found.

    Raises:
        ProtocolError: If the spectrum is too large or the size is invalid.
    """
    _check_dimension(sp, size)
    if len(sp.log_values) > ORACLE_MAX_DISTINCT_VALUES or sp.dimension > ORACLE_MAX_DIMENSION:
        raise ProtocolError(
            f"The oracle supports at most {ORACLE_MAX_DISTINCT_VALUES} distinct values"
        )
    rng = rng if rng is not None else np.random.default_rng(42)
    p = sp.expanded()
    prefix = np.concatenate(([0.0], np.cumsum(p)))
    best = overlap_fidelity(p, size)
    for kept in range(size):
        level = (1.0 - prefix[kept]) / (size - kept)
        if level <= 0 or (kept > 0 and level > p[kept - 1]):
            continue
        q = np.concatenate((p[:kept], np.full(size - kept, level)))
        if majorization.majorizes(_as_spectrum(q), sp):
            best = max(best, overlap_fidelity(q, size))
    for q in random_majorizers(sp, samples, rng):
        best = max(best, overlap_fidelity(q, size))
    return best


def fidelity_bound(sp: WeightedSpectrum, trace_t: int, bucket_count: int) -> float:
    """Evaluate the upper bound on Tr sqrt(rho') T over majorizers rho' of rho.

    With N = Tr{rho >= 1/M}, the bound is
    sqrt(N) sqrt(Tr rho{rho >= 1/M}) + sqrt(Tr T - N) sqrt(Tr rho{rho < 1/M}).

    Args:
        sp: The spectrum.
        trace_t: The rank of the projection T.
        bucket_count: The integer M.

    Returns:
        The bound.

    Raises:
        ProtocolError: If M < 1 or Tr T < M.
    """
    if bucket_count < 1:
        raise ProtocolError(f"M must be positive, got {bucket_count}")
    if trace_t < bucket_count:
        raise ProtocolError(f"Tr T = {trace_t} must be at least M = {bucket_count}")
    above = np.asarray(sp.log_values, dtype=float) >= -math.log(bucket_count) - VALIDITY_TOLERANCE
    count = sum(m for m, flag in zip(sp.multiplicities, above) if flag)
    mass_above = _clip_probability(math.exp(log_total(sp.log_masses[above])))
    mass_below = _clip_probability(math.exp(log_total(sp.log_masses[~above])))
    return math.sqrt(count) * math.sqrt(mass_above) + math.sqrt(
        max(trace_t - count, 0)
    ) * math.sqrt(mass_below)
