#  Copyright 2025 Canonical Ltd.
#  See LICENSE file for licensing details.

"""Unit tests for the command line entry point."""
import logging
import sys
from typing import Iterator

import pytest

import concentrate
from concentration.config import LOG_LEVEL_ENV_NAME, ConfigError


@pytest.fixture(name="restore_root_logger", autouse=True)
def restore_root_logger_fixture() -> Iterator[None]:
    """Restore the root logger handlers and level after each test."""
    root_logger = logging.getLogger()
    handlers, level = list(root_logger.handlers), root_logger.level
    yield
    root_logger.handlers = handlers
    root_logger.setLevel(level)


@pytest.mark.parametrize(
    "value, expected",
    [
        pytest.param(None, logging.WARNING, id="default"),
        pytest.param("DEBUG", logging.DEBUG, id="debug"),
    ],
)
def test_set_up_logging(monkeypatch: pytest.MonkeyPatch, value: str | None, expected: int):
    """
    arrange: The log level variable set or unset.
    act: Set up logging.
    assert: The root logger writes to standard error at the requested level.
    """
    if value is None:
        monkeypatch.delenv(LOG_LEVEL_ENV_NAME, raising=False)
    else:
        monkeypatch.setenv(LOG_LEVEL_ENV_NAME, value)

    concentrate._set_up_logging()  # pylint: disable=protected-access

    root_logger = logging.getLogger()
    assert root_logger.level == expected
    assert len(root_logger.handlers) == 1
    handler = root_logger.handlers[0]
    assert isinstance(handler, logging.StreamHandler)
    assert handler.stream is sys.stderr


def test_set_up_logging_invalid_level(monkeypatch: pytest.MonkeyPatch):
    """
    arrange: An invalid log level variable.
    act: Set up logging.
    assert: A ConfigError is raised.
    """
    monkeypatch.setenv(LOG_LEVEL_ENV_NAME, "LOUD")

    with pytest.raises(ConfigError):
        concentrate._set_up_logging()  # pylint: disable=protected-access
