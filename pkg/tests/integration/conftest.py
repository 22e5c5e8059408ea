#  Copyright 2025 Canonical Ltd.
#  See LICENSE file for licensing details.

"""Fixtures for the concentrate command line."""
import os
import subprocess  # nosec B404 the tests run the command line they ship
import sys
from pathlib import Path
from typing import Callable

import pytest

from concentration.config import LOG_LEVEL_ENV_NAME, THREADS_ENV_NAME

ENTRY_POINT = Path(__file__).parents[2] / "concentrate.py"

Runner = Callable[..., subprocess.CompletedProcess]


@pytest.fixture(name="seed", scope="module")
def seed_fixture(pytestconfig: pytest.Config) -> int:
    """Return the seed given on the pytest command line."""
    return pytestconfig.getoption("--seed")


@pytest.fixture(name="concentrate")
def concentrate_fixture() -> Runner:
    """Return a function running the command line in a subprocess."""

    def run(*args: str, env: dict[str, str] | None = None) -> subprocess.CompletedProcess:
        """Run the command line.

        Args:
            args: The command line arguments.
            env: Extra environment variables.

        Returns:
            The completed process with captured output.
        """
        environment = {
            key: value
            for key, value in os.environ.items()
            if key not in (LOG_LEVEL_ENV_NAME, THREADS_ENV_NAME)
        }
        environment.update(env or {})
        return subprocess.run(  # nosec B603 the arguments are fixed by the tests
            [sys.executable, str(ENTRY_POINT), *args],
            capture_output=True,
            text=True,
            env=environment,
            check=False,
            timeout=600,
        )

    return run
