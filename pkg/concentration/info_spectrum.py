#  Copyright 2025 Canonical Ltd.
#  See LICENSE file for licensing details.

"""Module for finite-n information-spectrum quantities on threshold sets.

Threshold tests compare log-values against -(n a) so that e^{-na} is never formed.
"""
import logging
import math
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, PrivateAttr, model_validator
from scipy.stats import linregress

from concentration.rate import Rate
from concentration.spectra import (
    DEFAULT_ENUMERATION_CAP,
    JointSpectrum,
    WeightedSpectrum,
    iid_product,
    log_total,
)

logger = logging.getLogger(__name__)

DEFAULT_LIMIT_SLACK = 0.02
EXACT_CHECK_TOLERANCE = 1e-12
MIN_REGRESSION_POINTS = 3
DEFAULT_R_GRID = (0.05, 0.1, 0.2)


class RateEstimationError(Exception):
    """Raised when a limit cannot be estimated from a finite sequence."""


class Quantity(str, Enum):
    """The information-spectrum quantities.

    Attributes:
        K: Mass of the eigenvalues at or above the threshold.
        ZETA: Exponent of the mass below the threshold.
        ZETA_C: Exponent of the mass at or above the threshold.
        ETA: Exponent of the dimension at or above the threshold.
        ZETA_HALF: Exponent of the square-root mass below the threshold.
        ZETA_C_HALF: Exponent of the square-root mass at or above the threshold.
    """

    K = "K"
    ZETA = "zeta"
    ZETA_C = "zeta_c"
    ETA = "eta"
    ZETA_HALF = "zeta_half"
    ZETA_C_HALF = "zeta_c_half"


class FiniteQuantities(BaseModel):
    """Exponents of the threshold set S_n(a) = {rho_n < e^{-na}} at a fixed n.

    Attributes:
        zeta_n: -(1/n) log Tr rho_n S_n(a).
        zeta_c_n: -(1/n) log Tr rho_n (I - S_n(a)).
        eta_n: -(1/n) log Tr (I - S_n(a)).
        zeta_half_n: -(1/n) log Tr sqrt(rho_n) S_n(a).
        zeta_c_half_n: -(1/n) log Tr sqrt(rho_n) (I - S_n(a)).
    """

    zeta_n: Rate
    zeta_c_n: Rate
    eta_n: Rate
    zeta_half_n: Rate
    zeta_c_half_n: Rate

    def get(self, quantity: Quantity) -> Rate:
        """Look a quantity up by its label.

        Args:
            quantity: The label, anything but K.

        Returns:
            The matching exponent.
        """
        return getattr(self, f"{quantity.value}_n")


class PairedQuantities(BaseModel):
    """Exponents of the projection P = {rho_n - e^{-na} sigma_n >= 0} for a general sigma_n.

    Attributes:
        zeta: -(1/n) log Tr rho_n (I - P).
        zeta_c: -(1/n) log Tr rho_n P.
        eta: -(1/n) log Tr sigma_n P.
    """

    zeta: Rate
    zeta_c: Rate
    eta: Rate


class RateCurve(BaseModel):
    """A sampled curve a -> value of one quantity.

    Attributes:
        label: The quantity sampled.
        points: The (a, value) pairs with a strictly increasing.
    """

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    label: Quantity
    points: list[tuple[float, float]]

    @model_validator(mode="after")
    def _check_points(self) -> "RateCurve":
        """Validate ordering and ranges.

        Returns:
            The validated curve.

        Raises:
            ValueError: If the abscissae are not increasing or a value is out of range.
        """
        a_values = [a for a, _ in self.points]
        if any(later <= earlier for earlier, later in zip(a_values, a_values[1:])):
            raise ValueError("Curve abscissae must be strictly increasing.")
        values = [value for _, value in self.points]
        if self.label == Quantity.K and any(not 0.0 <= v <= 1.0 for v in values):
            raise ValueError("K curves must lie in [0, 1].")
        # eta and the square-root exponents are legitimately negative
        if self.label in (Quantity.ZETA, Quantity.ZETA_C) and any(v < -1e-9 for v in values):
            raise ValueError(f"{self.label.value} curves must be nonnegative.")
        return self

    @property
    def a_values(self) -> np.ndarray:
        """The abscissae."""
        return np.array([a for a, _ in self.points], dtype=float)

    @property
    def values(self) -> np.ndarray:
        """The sampled values, +inf allowed."""
        return np.array([value for _, value in self.points], dtype=float)


class RateEstimate(BaseModel):
    """A limit estimated by regressing n * q_n against n.

    Attributes:
        slope: The estimated limit.
        residual: The largest deviation of n * q_n from the fitted line, divided by n.
    """

    model_config = ConfigDict(ser_json_inf_nan="constants")

    slope: float
    residual: float


class SpectrumSequence(BaseModel):
    """A sequence n -> rho_n of spectra evaluated on a range of n.

    Attributes:
        generator: Builds the n-th spectrum.
        n_range: The values of n to evaluate.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    generator: Callable[[int], WeightedSpectrum]
    n_range: list[int]
    _cache: dict[int, WeightedSpectrum] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def _check_range(self) -> "SpectrumSequence":
        """Validate the range of n.

        Returns:
            The validated sequence.

        Raises:
            ValueError: If n_range is empty or holds a non-positive n.
        """
        if not self.n_range or any(n < 1 for n in self.n_range):
            raise ValueError(f"n_range must hold positive integers, got {self.n_range}")
        return self

    @classmethod
    def iid(
        cls, base: WeightedSpectrum, n_range: Sequence[int], cap: int = DEFAULT_ENUMERATION_CAP
    ) -> "SpectrumSequence":
        """Build the sequence of i.i.d. product spectra.

        Args:
            base: The single-copy spectrum.
            n_range: The values of n.
            cap: The enumeration cap.

        Returns:
            The sequence rho^{(x) n}.
        """
        return cls(generator=lambda n: iid_product(base, n, cap=cap), n_range=list(n_range))

    @classmethod
    def from_spectra(cls, spectra: dict[int, WeightedSpectrum]) -> "SpectrumSequence":
        """Build a sequence from explicitly listed spectra.

        Args:
            spectra: The spectrum for each n.

        Returns:
            The sequence.
        """
        return cls(generator=spectra.__getitem__, n_range=sorted(spectra))

    def spectrum(self, n: int) -> WeightedSpectrum:
        """Get the n-th spectrum, generating it once.

        Args:
            n: The index.

        Returns:
            The spectrum rho_n.
        """
        if n not in self._cache:
            self._cache[n] = self.generator(n)
        return self._cache[n]


def _exponent(log_trace: float, n: int) -> Rate:
    """Turn a log-trace into -(1/n) log Tr.

    Args:
        log_trace: The log of the trace, -inf when it vanishes.
        n: The number of copies.

    Returns:
        The exponent, +inf for a vanishing trace.
    """
    if math.isinf(log_trace):
        return Rate.infinite()
    return Rate(value=-log_trace / n)


def _above(sp: WeightedSpectrum, n: int, a: float) -> np.ndarray:
    """Select the entries with value >= e^{-na}.

    Args:
        sp: The spectrum.
        n: The number of copies.
        a: The threshold rate.

    Returns:
        A boolean mask over the entries.
    """
    return np.asarray(sp.log_values, dtype=float) >= -(n * a)


def K_n(sp: WeightedSpectrum, n: int, a: float) -> float:  # pylint: disable=invalid-name
    """Compute the mass of the eigenvalues at or above e^{-na}.

    Args:
        sp: The spectrum rho_n.
        n: The number of copies.
        a: The threshold rate.

    Returns:
        Tr rho_n {rho_n >= e^{-na}}.
    """
    above = _above(sp, n, a)
    return min(math.exp(log_total(sp.log_masses[above])), 1.0)


def finite_quantities(sp: WeightedSpectrum, n: int, a: float) -> FiniteQuantities:
    """Compute the five finite-n exponents of the threshold set.

    Args:
        sp: The spectrum rho_n.
        n: The number of copies.
        a: The threshold rate.

    Returns:
        The exponents; a vanishing trace gives +inf.
    """
    above = _above(sp, n, a)
    below = ~above
    log_values = np.asarray(sp.log_values, dtype=float)
    log_roots = 0.5 * log_values + sp.log_multiplicities
    return FiniteQuantities(
        zeta_n=_exponent(log_total(sp.log_masses[below]), n),
        zeta_c_n=_exponent(log_total(sp.log_masses[above]), n),
        eta_n=_exponent(log_total(sp.log_multiplicities[above]), n),
        zeta_half_n=_exponent(log_total(log_roots[below]), n),
        zeta_c_half_n=_exponent(log_total(log_roots[above]), n),
    )


def paired_quantities(joint: JointSpectrum, n: int, a: float) -> PairedQuantities:
    """Compute the exponents of the projection {rho_n - e^{-na} sigma_n >= 0}.

    With sigma_n = I these reduce to the threshold-set exponents; with sigma_n = sqrt(rho_n) the
    projection equals {rho_n >= e^{-2na}}.

    Args:
        joint: The aligned pair (rho_n, sigma_n).
        n: The number of copies.
        a: The threshold rate.

    Returns:
        The exponents; a vanishing trace gives +inf.
    """
    log_rho = np.asarray(joint.log_rho, dtype=float)
    log_sigma = np.asarray(joint.log_sigma, dtype=float)
    with np.errstate(invalid="ignore"):
        projected = (log_rho - log_sigma) >= -(n * a)
    projected &= np.isfinite(log_rho)
    log_mults = joint.log_multiplicities
    return PairedQuantities(
        zeta=_exponent(log_total((log_rho + log_mults)[~projected]), n),
        zeta_c=_exponent(log_total((log_rho + log_mults)[projected]), n),
        eta=_exponent(log_total((log_sigma + log_mults)[projected]), n),
    )


def _quantity_value(sp: WeightedSpectrum, n: int, quantity: Quantity, a: float) -> float:
    """Evaluate one quantity as a float.

    Args:
        sp: The spectrum rho_n.
        n: The number of copies.
        quantity: The label.
        a: The threshold rate.

    Returns:
        The value, +inf allowed.
    """
    if quantity == Quantity.K:
        return K_n(sp, n, a)
    return float(finite_quantities(sp, n, a).get(quantity))


def rate_curve(
    seq: SpectrumSequence, n: int, quantity: Quantity, a_grid: Sequence[float]
) -> RateCurve:
    """Sample a finite-n curve.

    Args:
        seq: The spectrum sequence.
        n: The index to evaluate.
        quantity: The label.
        a_grid: Increasing threshold rates.

    Returns:
        The sampled curve.
    """
    sp = seq.spectrum(n)
    return RateCurve(
        label=quantity, points=[(a, _quantity_value(sp, n, quantity, a)) for a in a_grid]
    )


def _first_crossing(sp: WeightedSpectrum, n: int, log_level: float) -> Rate:
    """Find sup{R : Tr rho_n {rho_n >= e^{-nR}} <= e^{log_level}}.

    The mass above e^{-nR} is a right-continuous step function of R with jumps at -log v / n, so
    the supremum is the first jump at which the accumulated mass exceeds the level.

    Args:
        sp: The spectrum rho_n.
        n: The number of copies.
        log_level: The log of the mass level.

    Returns:
        The supremum, +inf when the level is never exceeded.
    """
    cumulative = np.logaddexp.accumulate(sp.log_masses)
    exceeded = np.flatnonzero(cumulative > log_level)
    if exceeded.size == 0:
        return Rate.infinite()
    return Rate(value=-sp.log_values[int(exceeded[0])] / n)


def optimal_rate_n(sp: WeightedSpectrum, n: int, eps: float) -> Rate:
    """Compute sup{R : K_n(R) <= eps}.

    Args:
        sp: The spectrum rho_n.
        n: The number of copies.
        eps: The allowed mass, in [0, 1).

    Returns:
        The finite-n optimal rate.
    """
    if eps <= 0:
        return Rate(value=-sp.log_values[0] / n)
    return _first_crossing(sp, n, math.log(eps))


def failure_rate_n(sp: WeightedSpectrum, n: int, r: float) -> Rate:
    """Compute sup{R : zeta^c_n(R) >= r}.

    Args:
        sp: The spectrum rho_n.
        n: The number of copies.
        r: The required exponent.

    Returns:
        The finite-n rate whose success mass decays at least as e^{-nr}.
    """
    return _first_crossing(sp, n, -(n * r))


def estimate_limit(n_values: Sequence[int], values: Sequence[float]) -> RateEstimate:
    """Estimate lim q_n by regressing n * q_n against n.

    Args:
        n_values: The indices.
        values: The finite per-n values q_n.

    Returns:
        The slope and the scaled residual.

    Raises:
        RateEstimationError: If fewer than three points are given.
    """
    if len(n_values) < MIN_REGRESSION_POINTS:
        raise RateEstimationError(
            f"At least {MIN_REGRESSION_POINTS} values of n are needed, got {len(n_values)}"
        )
    ns = np.asarray(n_values, dtype=float)
    scaled = ns * np.asarray(values, dtype=float)
    fit = linregress(ns, scaled)
    deviation = np.abs(scaled - (fit.slope * ns + fit.intercept)) / ns
    return RateEstimate(slope=float(fit.slope), residual=float(np.max(deviation)))


def empirical_rate(seq: SpectrumSequence, quantity: Quantity, a: float) -> RateEstimate:
    """Estimate the limit of a quantity at a fixed threshold rate.

    Args:
        seq: The spectrum sequence.
        quantity: The label.
        a: The threshold rate.

    Returns:
        The slope and the scaled residual.

    Raises:
        RateEstimationError: If the quantity is infinite at some n.
    """
    values = []
    for n in seq.n_range:
        value = _quantity_value(seq.spectrum(n), n, quantity, a)
        if math.isinf(value):
            raise RateEstimationError(f"{quantity.value} is infinite at n={n} for a={a}")
        values.append(value)
    estimate = estimate_limit(seq.n_range, values)
    logger.debug("Estimated %s(%s) = %s", quantity.value, a, estimate.slope)
    return estimate


class SuiteCheck(BaseModel):
    """One inequality check of the information-spectrum suite.

    Attributes:
        name: The inequality checked.
        a: The first threshold rate.
        b: The second threshold rate or the exponent r, if any.
        n: The index for checks exact at every n, None for limit checks.
        margin: The slack of the inequality, nonnegative when it holds.
        passed: Whether the check passed.
    """

    model_config = ConfigDict(ser_json_inf_nan="constants")

    name: str
    a: float
    b: Optional[float] = None
    n: Optional[int] = None
    margin: float
    passed: bool


class SuiteReport(BaseModel):
    """The outcome of the information-spectrum inequality suite.

    Attributes:
        checks: Every check evaluated.
    """

    checks: list[SuiteCheck]

    @property
    def passed(self) -> bool:
        """Whether every check passed."""
        return all(check.passed for check in self.checks)

    def failures(self) -> list[SuiteCheck]:
        """List the failed checks.

        Returns:
            The checks that did not pass.
        """
        return [check for check in self.checks if not check.passed]


def _margin(larger: float, smaller: float) -> float:
    """Compute larger - smaller with infinite operands.

    Args:
        larger: The side expected to be larger.
        smaller: The side expected to be smaller.

    Returns:
        The margin; +inf when the larger side is +inf.
    """
    if math.isinf(larger) and larger > 0:
        return math.inf
    if math.isinf(smaller) and smaller > 0:
        return -math.inf
    return larger - smaller


def _limit(n_values: Sequence[int], values: Sequence[float]) -> float:
    """Estimate a limit, letting infinite sequences through.

    Args:
        n_values: The indices.
        values: The per-n values, +inf allowed.

    Returns:
        The regression slope over the finite values, or +inf when too few are finite.
    """
    finite = [(n, v) for n, v in zip(n_values, values) if math.isfinite(v)]
    if len(finite) < MIN_REGRESSION_POINTS:
        return math.inf
    return estimate_limit([n for n, _ in finite], [v for _, v in finite]).slope


def inequality_suite(
    seq_rho: SpectrumSequence,
    seq_sigma: SpectrumSequence,
    a_grid: Sequence[float],
    b_grid: Sequence[float],
    slack: float = DEFAULT_LIMIT_SLACK,
    r_grid: Sequence[float] = DEFAULT_R_GRID,
) -> SuiteReport:
    """Check the information-spectrum inequalities for a pair of sequences.

    sigma_n is aligned with rho_n in a common eigenbasis, both sorted descending. The bound
    zeta^c_n(a) <= eta_n(a) + a follows from an operator inequality and is checked at every n
    without slack. The remaining inequalities concern limits: they are checked on regression
    estimates with the given slack.

    Args:
        seq_rho: The sequence rho_n.
        seq_sigma: The sequence sigma_n, on the same n_range.
        a_grid: The first threshold rates.
        b_grid: The second threshold rates.
        slack: The slack allowed on limit inequalities, in nats.
        r_grid: The exponents for the sup/inf comparison.

    Returns:
        The report of every check.
    """
    n_range = seq_rho.n_range
    rates = sorted(set(a_grid) | set(b_grid))
    zeta: dict[float, list[float]] = {rate: [] for rate in rates}
    eta: dict[float, list[float]] = {rate: [] for rate in rates}
    checks = []
    for n in n_range:
        joint = JointSpectrum.co_sorted(seq_rho.spectrum(n), seq_sigma.spectrum(n))
        for rate in rates:
            paired = paired_quantities(joint, n, rate)
            zeta[rate].append(float(paired.zeta))
            eta[rate].append(float(paired.eta))
            if rate in a_grid:
                margin = _margin(float(paired.eta) + rate, float(paired.zeta_c))
                if math.isinf(paired.eta.value) and math.isinf(paired.zeta_c.value):
                    margin = math.inf
                checks.append(
                    SuiteCheck(
                        name="zeta_c <= eta + a",
                        a=rate,
                        n=n,
                        margin=margin,
                        passed=margin >= -EXACT_CHECK_TOLERANCE,
                    )
                )
    zeta_limit = {rate: _limit(n_range, zeta[rate]) for rate in rates}
    eta_limit = {rate: _limit(n_range, eta[rate]) for rate in rates}
    checks.extend(_two_point_checks(zeta_limit, eta_limit, a_grid, b_grid, slack))
    checks.extend(_sup_checks(zeta_limit, eta_limit, a_grid, r_grid, slack))
    checks.extend(_upper_bound_checks(zeta_limit, eta_limit, a_grid, slack))
    report = SuiteReport(checks=checks)
    logger.info(
        "Inequality suite: %d checks, %d failed", len(report.checks), len(report.failures())
    )
    return report


def _limit_check(name: str, a: float, b: float, margin: float, slack: float) -> SuiteCheck:
    """Build a check on limit estimates.

    Args:
        name: The inequality.
        a: The first rate.
        b: The second rate or exponent.
        margin: The slack of the inequality.
        slack: The allowed deficit.

    Returns:
        The check.
    """
    return SuiteCheck(name=name, a=a, b=b, margin=margin, passed=margin >= -slack)


def _two_point_checks(
    zeta: dict[float, float],
    eta: dict[float, float],
    a_grid: Sequence[float],
    b_grid: Sequence[float],
    slack: float,
) -> list[SuiteCheck]:
    """Check the two-point comparisons on limit estimates.

    Args:
        zeta: The limit of zeta per rate.
        eta: The limit of eta per rate.
        a_grid: The first rates.
        b_grid: The second rates.
        slack: The allowed deficit.

    Returns:
        The checks.
    """
    checks = []
    for a in a_grid:
        for b in b_grid:
            left = min(zeta[a], a + eta[a])
            right = min(zeta[b], a + eta[b])
            checks.append(
                _limit_check("min(zeta, a + eta) comparison", a, b, _margin(left, right), slack)
            )
            if eta[b] > eta[a] + slack:
                margin = _margin(eta[a] + a, zeta[b])
                checks.append(_limit_check("eta(a) + a >= zeta(b)", a, b, margin, slack))
            if zeta[a] < zeta[b] - slack:
                margin = _margin(zeta[a], a + eta[b])
                checks.append(_limit_check("zeta(a) >= a + eta(b)", a, b, margin, slack))
    return checks


def _sup_checks(
    zeta: dict[float, float],
    eta: dict[float, float],
    a_grid: Sequence[float],
    r_grid: Sequence[float],
    slack: float,
) -> list[SuiteCheck]:
    """Check sup{a - zeta(a) | zeta(a) <= r} >= sup{-eta(a) | a + eta(a) <= r} on the grid.

    Args:
        zeta: The limit of zeta per rate.
        eta: The limit of eta per rate.
        a_grid: The rates forming both feasible sets.
        r_grid: The exponents r.
        slack: The allowed deficit.

    Returns:
        The checks, one per r whose right-hand set is nonempty.
    """
    checks = []
    for r in r_grid:
        right = [-eta[a] for a in a_grid if a + eta[a] <= r]
        if not right:
            continue
        left = [a - zeta[a] for a in a_grid if zeta[a] <= r + slack]
        margin = _margin(max(left), max(right)) if left else -math.inf
        checks.append(_limit_check("sup(a - zeta) >= sup(-eta)", min(a_grid), r, margin, slack))
    return checks


def _upper_bound_checks(
    zeta: dict[float, float], eta: dict[float, float], a_grid: Sequence[float], slack: float
) -> list[SuiteCheck]:
    """Check eta(a) <= inf{zeta(a') - a' | a' <= a, zeta increasing at a'} on the grid.

    Args:
        zeta: The limit of zeta per rate.
        eta: The limit of eta per rate.
        a_grid: The rates.
        slack: The allowed deficit.

    Returns:
        The checks, one per a with a nonempty infimum set.
    """
    grid = sorted(a_grid)
    increasing = [
        later
        for earlier, later in zip(grid, grid[1:])
        if math.isfinite(zeta[later]) and zeta[later] > zeta[earlier] + slack
    ]
    checks = []
    for a in grid:
        candidates = [zeta[other] - other for other in increasing if other <= a]
        if not candidates:
            continue
        checks.append(
            _limit_check("eta <= inf(zeta - a')", a, a, _margin(min(candidates), eta[a]), slack)
        )
    return checks
