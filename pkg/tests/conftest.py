#  Copyright 2025 Canonical Ltd.
#  See LICENSE file for licensing details.

"""Fixtures for all tests."""

import numpy as np
import pytest
from pytest import Parser

SEED_PARAM = "--seed"
DEFAULT_TEST_SEED = 42


def pytest_addoption(parser: Parser) -> None:
    """Parse additional pytest options.

    Args:
        parser: Pytest parser.
    """
    parser.addoption(
        SEED_PARAM,
        action="store",
        type=int,
        default=DEFAULT_TEST_SEED,
        help="Seed of the random generator used by randomized property tests",
    )


@pytest.fixture(name="rng")
def rng_fixture(pytestconfig: pytest.Config) -> np.random.Generator:
    """Return a freshly seeded random generator."""
    return np.random.default_rng(pytestconfig.getoption(SEED_PARAM))
