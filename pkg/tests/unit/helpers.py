#  Copyright 2025 Canonical Ltd.
#  See LICENSE file for licensing details.

"""Helper functions for the unit tests."""

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from concentration import spectra
from concentration.spectra import WeightedSpectrum


def random_spectrum(
    rng: np.random.Generator, max_letters: int = 6, min_letters: int = 2
) -> WeightedSpectrum:
    """Draw a random spectrum from a flat Dirichlet distribution.

    Args:
        rng: The random generator.
        max_letters: The largest number of eigenvalues.
        min_letters: The smallest number of eigenvalues.

    Returns:
        The spectrum.
    """
    letters = int(rng.integers(min_letters, max_letters + 1))
    return spectra.from_values(list(rng.dirichlet(np.ones(letters))))


def two_letter_product(p: float, n: int) -> list[tuple[float, int]]:
    """Compute the n-fold product of (p, 1 - p) by the binomial formula.

    Args:
        p: The larger eigenvalue.
        n: The number of copies.

    Returns:
        (value, multiplicity) pairs sorted by decreasing value.
    """
    return [(p ** (n - k) * (1 - p) ** k, math.comb(n, k)) for k in range(n + 1)]


def bernoulli_divergence(rate: float, q: float) -> float:
    """Compute the binary relative entropy D(rate || q).

    Args:
        rate: The first success probability.
        q: The second success probability.

    Returns:
        The divergence in nats.
    """
    terms = [(rate, q), (1 - rate, 1 - q)]
    return sum(x * math.log(x / y) for x, y in terms if x > 0)


def write_json(path: Path, document: Any) -> Path:
    """Write a JSON document.

    Args:
        path: The file to write.
        document: The document.

    Returns:
        The path.
    """
    path.write_text(json.dumps(document), encoding="utf-8")
    return path
