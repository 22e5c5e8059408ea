#  Copyright 2025 Canonical Ltd.
#  See LICENSE file for licensing details.

"""Module for constructing, validating and combining Schmidt spectra.

A spectrum is stored in the log domain: product spectra of many copies have eigenvalues far
below the smallest representable double, while their logarithms stay well behaved.
"""
import itertools
import logging
import math
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.special import logsumexp

logger = logging.getLogger(__name__)

NORMALIZATION_TOLERANCE = 1e-9
# Accumulated rounding of log-domain products over thousands of copies stays below this.
STORED_NORMALIZATION_TOLERANCE = 1e-10
MERGE_RELATIVE_TOLERANCE = 1e-12
DEFAULT_ENUMERATION_CAP = 10**7

Entry = tuple[float, int]


class SpectrumError(Exception):
    """Raised when a spectrum is invalid or cannot be constructed."""


class EnumerationLimitError(SpectrumError):
    """Raised when a type-class enumeration exceeds the configured cap."""


def log_total(log_terms: np.ndarray) -> float:
    """Sum terms given by their logarithms.

    Args:
        log_terms: The logarithms of the nonnegative terms. -inf denotes a zero term.

    Returns:
        The logarithm of the sum, -inf for an empty or all-zero sum.
    """
    log_terms = np.asarray(log_terms, dtype=float)
    if log_terms.size == 0 or not np.any(np.isfinite(log_terms)):
        return -math.inf
    return float(logsumexp(log_terms[np.isfinite(log_terms)]))


class WeightedSpectrum(BaseModel):
    """A descending eigenvalue distribution stored as (value, multiplicity) pairs.

    Attributes:
        log_values: The natural logarithms of the distinct eigenvalues, strictly decreasing.
        multiplicities: How often each distinct eigenvalue occurs.
    """

    model_config = ConfigDict(frozen=True)

    log_values: tuple[float, ...]
    multiplicities: tuple[int, ...]

    @model_validator(mode="after")
    def _check_invariants(self) -> "WeightedSpectrum":
        """Validate ordering, multiplicities and normalization.

        Returns:
            The validated spectrum.

        Raises:
            ValueError: If an invariant is violated.
        """
        if not self.log_values:
            raise ValueError("A spectrum needs at least one entry.")
        if len(self.log_values) != len(self.multiplicities):
            raise ValueError("Every value needs exactly one multiplicity.")
        if any(m < 1 for m in self.multiplicities):
            raise ValueError(f"Multiplicities must be positive: {self.multiplicities}")
        log_values = np.asarray(self.log_values, dtype=float)
        if not np.all(np.isfinite(log_values)):
            raise ValueError("Spectrum values must be strictly positive and finite.")
        if np.any(np.diff(log_values) >= 0):
            raise ValueError("Spectrum values must be strictly decreasing.")
        log_norm = log_total(log_values + self.log_multiplicities)
        if abs(math.expm1(log_norm)) > STORED_NORMALIZATION_TOLERANCE:
            raise ValueError(f"Spectrum is not normalized: total mass {math.exp(log_norm)}")
        return self

    @classmethod
    def uniform(cls, dimension: int) -> "WeightedSpectrum":
        """Build the spectrum of a maximally entangled state.

        Args:
            dimension: The Schmidt rank.

        Returns:
            The uniform spectrum of the given dimension.
        """
        return cls(log_values=(-math.log(dimension),), multiplicities=(dimension,))

    @cached_property
    def log_multiplicities(self) -> np.ndarray:
        """The natural logarithms of the multiplicities."""
        return np.array([math.log(m) for m in self.multiplicities], dtype=float)

    @cached_property
    def log_masses(self) -> np.ndarray:
        """The logarithms of value times multiplicity per entry."""
        return np.asarray(self.log_values, dtype=float) + self.log_multiplicities

    @cached_property
    def values(self) -> np.ndarray:
        """The distinct eigenvalues, descending."""
        return np.exp(np.asarray(self.log_values, dtype=float))

    @cached_property
    def masses(self) -> np.ndarray:
        """The probability mass carried by each entry."""
        return np.exp(self.log_masses)

    @property
    def dimension(self) -> int:
        """The total dimension, i.e. the Schmidt rank."""
        return sum(self.multiplicities)

    @property
    def max_value(self) -> float:
        """The largest eigenvalue."""
        return float(self.values[0])

    @property
    def entries(self) -> list[Entry]:
        """The (value, multiplicity) pairs, descending."""
        return [(float(v), m) for v, m in zip(self.values, self.multiplicities)]

    def expanded(self) -> np.ndarray:
        """List every eigenvalue with repetition.

        Returns:
            The descending eigenvalue vector of length `dimension`.
        """
        return np.repeat(self.values, self.multiplicities)


class IIDSource(BaseModel):
    """The spectrum of n independent copies of a single-copy state.

    Attributes:
        base: The single-copy spectrum.
        copies: The number of copies n.
    """

    model_config = ConfigDict(frozen=True)

    base: WeightedSpectrum
    copies: int

    @model_validator(mode="after")
    def _check_copies(self) -> "IIDSource":
        """Validate the number of copies.

        Returns:
            The validated source.

        Raises:
            ValueError: If the number of copies is not positive.
        """
        if self.copies < 1:
            raise ValueError(f"The number of copies must be positive, got {self.copies}")
        return self

    def spectrum(self, cap: int = DEFAULT_ENUMERATION_CAP) -> WeightedSpectrum:
        """Enumerate the product spectrum.

        Args:
            cap: The maximum number of type classes to enumerate.

        Returns:
            The spectrum of the n-fold tensor product.
        """
        return iid_product(self.base, self.copies, cap=cap)


class JointSpectrum(BaseModel):
    """Commuting pair (rho, sigma) given by aligned eigenvalues in a common eigenbasis.

    Attributes:
        log_rho: The logarithms of the eigenvalues of rho, nonincreasing; -inf marks padding.
        log_sigma: The logarithms of the aligned eigenvalues of sigma; sigma need not be
            normalized (the identity and the square root of rho are common choices).
        multiplicities: How often each aligned pair occurs.
    """

    model_config = ConfigDict(frozen=True)

    log_rho: tuple[float, ...]
    log_sigma: tuple[float, ...]
    multiplicities: tuple[int, ...]

    @model_validator(mode="after")
    def _check_invariants(self) -> "JointSpectrum":
        """Validate lengths, ordering and normalization of rho.

        Returns:
            The validated pair.

        Raises:
            ValueError: If an invariant is violated.
        """
        if not (len(self.log_rho) == len(self.log_sigma) == len(self.multiplicities)):
            raise ValueError("rho, sigma and multiplicities must have equal lengths.")
        if not self.multiplicities or any(m < 1 for m in self.multiplicities):
            raise ValueError("Multiplicities must be positive.")
        log_rho = np.asarray(self.log_rho, dtype=float)
        if np.any(log_rho[1:] > log_rho[:-1]):
            raise ValueError("rho eigenvalues must be nonincreasing.")
        log_norm = log_total(log_rho + self.log_multiplicities)
        if abs(math.expm1(log_norm)) > STORED_NORMALIZATION_TOLERANCE:
            raise ValueError(f"rho is not normalized: total mass {math.exp(log_norm)}")
        return self

    @cached_property
    def log_multiplicities(self) -> np.ndarray:
        """The natural logarithms of the multiplicities."""
        return np.array([math.log(m) for m in self.multiplicities], dtype=float)

    @classmethod
    def co_sorted(cls, rho: WeightedSpectrum, sigma: WeightedSpectrum) -> "JointSpectrum":
        """Align two spectra index by index, both sorted descending.

        The shorter spectrum is padded with zero eigenvalues.

        Args:
            rho: The first spectrum.
            sigma: The second spectrum.

        Returns:
            The aligned pair.
        """
        rho_runs = _padded_runs(rho, sigma.dimension)
        sigma_runs = _padded_runs(sigma, rho.dimension)
        log_rho: list[float] = []
        log_sigma: list[float] = []
        multiplicities: list[int] = []
        i = j = 0
        rho_left, sigma_left = rho_runs[0][1], sigma_runs[0][1]
        while i < len(rho_runs) and j < len(sigma_runs):
            take = min(rho_left, sigma_left)
            log_rho.append(rho_runs[i][0])
            log_sigma.append(sigma_runs[j][0])
            multiplicities.append(take)
            rho_left -= take
            sigma_left -= take
            if rho_left == 0:
                i += 1
                rho_left = rho_runs[i][1] if i < len(rho_runs) else 0
            if sigma_left == 0:
                j += 1
                sigma_left = sigma_runs[j][1] if j < len(sigma_runs) else 0
        return cls(
            log_rho=tuple(log_rho),
            log_sigma=tuple(log_sigma),
            multiplicities=tuple(multiplicities),
        )

    @classmethod
    def with_sqrt(cls, rho: WeightedSpectrum) -> "JointSpectrum":
        """Pair rho with its own square root.

        Args:
            rho: The spectrum.

        Returns:
            The pair (rho, sqrt(rho)).
        """
        log_values = np.asarray(rho.log_values, dtype=float)
        return cls(
            log_rho=rho.log_values,
            log_sigma=tuple(float(v) for v in 0.5 * log_values),
            multiplicities=rho.multiplicities,
        )

    @classmethod
    def with_identity(cls, rho: WeightedSpectrum) -> "JointSpectrum":
        """Pair rho with the (unnormalized) identity.

        Args:
            rho: The spectrum.

        Returns:
            The pair (rho, I).
        """
        return cls(
            log_rho=rho.log_values,
            log_sigma=(0.0,) * len(rho.log_values),
            multiplicities=rho.multiplicities,
        )


def _padded_runs(sp: WeightedSpectrum, dimension: int) -> list[tuple[float, int]]:
    """List the runs of a spectrum, padded with zeros up to a dimension.

    Args:
        sp: The spectrum.
        dimension: The dimension to pad to.

    Returns:
        The (log value, multiplicity) runs.
    """
    runs = list(zip(sp.log_values, sp.multiplicities))
    if dimension > sp.dimension:
        runs.append((-math.inf, dimension - sp.dimension))
    return runs


def from_values(
    values: Sequence[float], tolerance: float = NORMALIZATION_TOLERANCE
) -> WeightedSpectrum:
    """Build a spectrum from a list of eigenvalues.

    Args:
        values: The eigenvalues, in any order, possibly repeated.
        tolerance: The largest deviation of the total from 1 that is silently rescaled.

    Returns:
        The normalized, sorted and merged spectrum.
    """
    return from_entries([(value, 1) for value in values], tolerance=tolerance)


def from_entries(
    entries: Sequence[Entry], tolerance: float = NORMALIZATION_TOLERANCE
) -> WeightedSpectrum:
    """Build a spectrum from (value, multiplicity) pairs.

    Args:
        entries: The pairs, in any order.
        tolerance: The largest deviation of the total from 1 that is silently rescaled.

    Returns:
        The normalized, sorted and merged spectrum.

    Raises:
        SpectrumError: If the list is empty, a value is not positive, a multiplicity is not a
            positive integer or the total deviates from 1 by more than the tolerance.
    """
    if not entries:
        raise SpectrumError("Cannot build a spectrum from an empty list.")
    for value, multiplicity in entries:
        if not value > 0 or not math.isfinite(value):
            raise SpectrumError(f"Spectrum values must be positive and finite, got {value}")
        if int(multiplicity) != multiplicity or multiplicity < 1:
            raise SpectrumError(f"Multiplicities must be positive integers, got {multiplicity}")
    total = math.fsum(value * multiplicity for value, multiplicity in entries)
    if abs(total - 1.0) > tolerance:
        raise SpectrumError(f"Spectrum sums to {total!r}, which is not 1 within {tolerance}")
    log_values = np.log([value for value, _ in entries]) - math.log(total)
    return _merged(log_values, [int(multiplicity) for _, multiplicity in entries])


def _merged(log_values: np.ndarray, multiplicities: Sequence[int]) -> WeightedSpectrum:
    """Sort descending and merge values that collide within the relative merge tolerance.

    Args:
        log_values: The logarithms of the values.
        multiplicities: The multiplicity of each value.

    Returns:
        The merged spectrum.
    """
    order = np.argsort(-np.asarray(log_values, dtype=float), kind="stable")
    merged_logs: list[float] = []
    merged_counts: list[int] = []
    for index in order:
        log_value = float(log_values[index])
        if merged_logs and merged_logs[-1] - log_value <= MERGE_RELATIVE_TOLERANCE:
            merged_counts[-1] += multiplicities[index]
        else:
            merged_logs.append(log_value)
            merged_counts.append(multiplicities[index])
    return WeightedSpectrum(log_values=tuple(merged_logs), multiplicities=tuple(merged_counts))


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """Iterate over the compositions of an integer into a fixed number of nonnegative parts.

    Args:
        total: The integer to split.
        parts: The number of parts.

    Yields:
        Every tuple of `parts` nonnegative integers summing to `total`.
    """
    # stars and bars: choose the positions of parts - 1 bars among total + parts - 1 slots
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        previous = -1
        composition = []
        for bar in bars:
            composition.append(bar - previous - 1)
            previous = bar
        composition.append(total + parts - 1 - previous - 1)
        yield tuple(composition)


def _multinomial(counts: Sequence[int]) -> int:
    """Compute the multinomial coefficient exactly.

    Args:
        counts: The part sizes.

    Returns:
        (sum counts)! / prod(counts!)
    """
    result, running = 1, 0
    for count in counts:
        running += count
        result *= math.comb(running, count)
    return result


def type_class_count(letters: int, copies: int) -> int:
    """Count the compositions of `copies` into `letters` parts.

    Args:
        letters: The number of distinct single-copy values.
        copies: The number of copies.

    Returns:
        binomial(copies + letters - 1, letters - 1)
    """
    return math.comb(copies + letters - 1, letters - 1)


def _check_enumeration(letters: int, copies: int, cap: int) -> None:
    """Reject intractable type-class enumerations.

    Args:
        letters: The number of distinct single-copy values.
        copies: The number of copies.
        cap: The maximum number of type classes.

    Raises:
        SpectrumError: If the number of copies is not positive.
        EnumerationLimitError: If the enumeration exceeds the cap.
    """
    if copies < 1:
        raise SpectrumError(f"The number of copies must be positive, got {copies}")
    count = type_class_count(letters, copies)
    if count > cap:
        raise EnumerationLimitError(
            f"{count} type classes for {letters} letters and n={copies} exceed the cap {cap}"
        )


def iid_product(
    base: WeightedSpectrum, n: int, cap: int = DEFAULT_ENUMERATION_CAP
) -> WeightedSpectrum:
    """Compute the spectrum of n copies by type-class enumeration.

    Args:
        base: The single-copy spectrum.
        n: The number of copies.
        cap: The maximum number of type classes to enumerate.

    Returns:
        The exact product spectrum with multinomial multiplicities.
    """
    letters = len(base.log_values)
    _check_enumeration(letters, n, cap)
    base_logs = np.asarray(base.log_values, dtype=float)
    log_values = []
    multiplicities = []
    for composition in _compositions(n, letters):
        log_values.append(float(np.dot(composition, base_logs)))
        multiplicity = _multinomial(composition)
        for count, base_multiplicity in zip(composition, base.multiplicities):
            multiplicity *= base_multiplicity**count
        multiplicities.append(multiplicity)
    product = _merged(np.array(log_values), multiplicities)
    logger.debug(
        "Merged %d type classes of n=%d into %d entries",
        len(log_values),
        n,
        len(product.log_values),
    )
    return product


def joint_iid_product(
    base: JointSpectrum, n: int, cap: int = DEFAULT_ENUMERATION_CAP
) -> JointSpectrum:
    """Compute the aligned pair (rho^n, sigma^n) of n copies of a commuting pair.

    Args:
        base: The single-copy pair.
        n: The number of copies.
        cap: The maximum number of type classes to enumerate.

    Returns:
        The product pair, sorted by rho descending.
    """
    letters = len(base.log_rho)
    _check_enumeration(letters, n, cap)
    rho_logs = np.asarray(base.log_rho, dtype=float)
    sigma_logs = np.asarray(base.log_sigma, dtype=float)
    rows = []
    for composition in _compositions(n, letters):
        multiplicity = _multinomial(composition)
        for count, base_multiplicity in zip(composition, base.multiplicities):
            multiplicity *= base_multiplicity**count
        weights = np.asarray(composition, dtype=float)
        used = weights > 0
        rows.append(
            (
                float(np.dot(weights[used], rho_logs[used])),
                float(np.dot(weights[used], sigma_logs[used])),
                multiplicity,
            )
        )
    rows.sort(key=lambda row: -row[0])
    return JointSpectrum(
        log_rho=tuple(row[0] for row in rows),
        log_sigma=tuple(row[1] for row in rows),
        multiplicities=tuple(row[2] for row in rows),
    )


def tensor(p: WeightedSpectrum, q: WeightedSpectrum) -> WeightedSpectrum:
    """Compute the spectrum of a tensor product.

    Args:
        p: The first spectrum.
        q: The second spectrum.

    Returns:
        All pairwise products with multiplied multiplicities, merged.
    """
    log_values = np.add.outer(
        np.asarray(p.log_values, dtype=float), np.asarray(q.log_values, dtype=float)
    ).ravel()
    multiplicities = [mp * mq for mp in p.multiplicities for mq in q.multiplicities]
    return _merged(log_values, multiplicities)


def entropy(sp: WeightedSpectrum) -> float:
    """Compute the von Neumann entropy in nats.

    Args:
        sp: The spectrum.

    Returns:
        -sum m v log v
    """
    if len(sp.log_values) == 1 and sp.multiplicities[0] == 1:
        return 0.0
    return float(-np.sum(sp.masses * np.asarray(sp.log_values, dtype=float)))


def renyi_psi(sp: WeightedSpectrum, s: float) -> float:
    """Compute psi(s) = log Tr rho^s.

    Args:
        sp: The spectrum.
        s: The order; negative orders are defined for finite spectra.

    Returns:
        log sum m v^s, exactly 0 at s = 1.
    """
    if s == 1:
        return 0.0
    return float(logsumexp(s * np.asarray(sp.log_values, dtype=float) + sp.log_multiplicities))


def renyi_psi_derivatives(sp: WeightedSpectrum, s: float) -> tuple[float, float]:
    """Compute the first two derivatives of psi.

    Args:
        sp: The spectrum.
        s: The order.

    Returns:
        (psi'(s), psi''(s)): the mean and variance of log v under the tilted weights m v^s.
    """
    log_values = np.asarray(sp.log_values, dtype=float)
    exponents = s * log_values + sp.log_multiplicities
    weights = np.exp(exponents - logsumexp(exponents))
    first = float(np.dot(weights, log_values))
    second = float(np.dot(weights, (log_values - first) ** 2))
    return first, second


def renyi_entropy(sp: WeightedSpectrum, s: float) -> float:
    """Compute the Rényi entropy psi(s) / (1 - s).

    Args:
        sp: The spectrum.
        s: The order; s = 1 gives the von Neumann entropy, s = inf the min-entropy.

    Returns:
        The Rényi entropy in nats.
    """
    if s == 1:
        return entropy(sp)
    if math.isinf(s):
        return -sp.log_values[0]
    return renyi_psi(sp, s) / (1.0 - s)
