#  Copyright 2025 Canonical Ltd.
#  See LICENSE file for licensing details.

"""Module for the configuration of a command line run."""
import logging
import math
import os
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, model_validator

from concentration.majorization import PREFIX_TOLERANCE
from concentration.protocols import FLOOR_SNAP_TOLERANCE
from concentration.spectra import DEFAULT_ENUMERATION_CAP, NORMALIZATION_TOLERANCE

logger = logging.getLogger(__name__)

THREADS_ENV_NAME = "CONCENTRATE_THREADS"
LOG_LEVEL_ENV_NAME = "CONCENTRATE_LOG_LEVEL"
DEFAULT_SEED = 42


class ConfigError(Exception):
    """Raised when a configuration error occurs."""


class OutputFormat(str, Enum):
    """The output formats.

    Attributes:
        JSON: A JSON document.
        CSV: A tidy CSV table with a header row.
    """

    JSON = "json"
    CSV = "csv"


class LogBase(str, Enum):
    """The unit of rates and exponents in the output.

    Attributes:
        NATS: Natural logarithms.
        BITS: Base-2 logarithms.
    """

    NATS = "nats"
    BITS = "bits"

    @property
    def scale(self) -> float:
        """The factor converting a value in nats into this unit."""
        return 1.0 if self == LogBase.NATS else 1.0 / math.log(2.0)


class Tolerances(BaseModel):
    """The numerical tolerances a run may override.

    Attributes:
        normalization: The deviation from 1 of a spectrum total that is silently rescaled.
        prefix: The slack of majorization prefix comparisons.
        floor_snap: The snap of floor((1 - h) / x) to the integer just above.
        enumeration_cap: The largest number of type classes an i.i.d. product may enumerate.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    normalization: PositiveFloat = NORMALIZATION_TOLERANCE
    prefix: PositiveFloat = PREFIX_TOLERANCE
    floor_snap: PositiveFloat = FLOOR_SNAP_TOLERANCE
    enumeration_cap: PositiveInt = DEFAULT_ENUMERATION_CAP


class Grid(BaseModel):
    """An evenly spaced grid min:max:step, both ends included.

    Attributes:
        start: The first point.
        stop: The last point.
        step: The spacing.
    """

    model_config = ConfigDict(frozen=True)

    start: float
    stop: float
    step: PositiveFloat

    @model_validator(mode="after")
    def _check_order(self) -> "Grid":
        """Validate start < stop.

        Returns:
            The validated grid.

        Raises:
            ValueError: If the grid is empty.
        """
        if not self.start < self.stop:
            raise ValueError(f"Grid start {self.start} must be below its stop {self.stop}")
        return self

    @classmethod
    def parse(cls, text: str) -> "Grid":
        """Parse a min:max:step string.

        Args:
            text: The grid string.

        Returns:
            The grid.

        Raises:
            ConfigError: If the string is malformed or describes an empty grid.
        """
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"Invalid grid {text!r}. Expected min:max:step.")
        try:
            start, stop, step = (float(part) for part in parts)
            return cls(start=start, stop=stop, step=step)
        except ValueError as exc:
            raise ConfigError(f"Invalid grid {text!r}: {exc}") from exc

    def points(self) -> list[float]:
        """List the grid points.

        Returns:
            round((stop - start) / step) + 1 points from start to stop.
        """
        count = int(round((self.stop - self.start) / self.step)) + 1
        return [float(point) for point in np.linspace(self.start, self.stop, count)]


class RunConfig(BaseModel):
    """The configuration of one command line run.

    Attributes:
        subcommand: The subcommand to run.
        inputs: The input documents by role, e.g. "spectrum" or "levels".
        grids: The parameter grids by name.
        parameters: The scalar parameters by name, e.g. "x" or "beta0".
        options: The named choices, e.g. the formula to evaluate.
        flags: The switches that are on.
        output: Where to write the result; standard output when None.
        output_format: The output format.
        log_base: The unit of rates in the output.
        seed: The seed of randomized oracles.
        clamp: Whether zeta may be clamped outside the interval on which it is stated.
        tolerances: The numerical tolerances.
        threads: The number of worker threads for sweeps.
    """

    subcommand: str
    inputs: dict[str, Path] = Field(default_factory=dict)
    grids: dict[str, Grid] = Field(default_factory=dict)
    parameters: dict[str, float] = Field(default_factory=dict)
    options: dict[str, str] = Field(default_factory=dict)
    flags: set[str] = Field(default_factory=set)
    output: Optional[Path] = None
    output_format: OutputFormat = OutputFormat.JSON
    log_base: LogBase = LogBase.NATS
    seed: int = DEFAULT_SEED
    clamp: bool = True
    tolerances: Tolerances = Field(default_factory=Tolerances)
    threads: PositiveInt = 1


def load_tolerances(path: Optional[Path]) -> Tolerances:
    """Load tolerance overrides from a YAML file.

    Args:
        path: The YAML file, a mapping from tolerance name to value. None for the defaults.

    Returns:
        The tolerances.

    Raises:
        ConfigError: If the file cannot be read or holds invalid overrides.
    """
    if path is None:
        return Tolerances()
    try:
        overrides = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"Could not read tolerances file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"Invalid tolerances file {path}. Invalid yaml.") from exc
    if overrides is None:
        return Tolerances()
    if not isinstance(overrides, dict):
        raise ConfigError(
            f"Invalid tolerances file {path}. Expected a mapping at the top level."
        )
    try:
        tolerances = Tolerances(**overrides)
    except ValueError as exc:
        raise ConfigError(f"Invalid tolerances file {path}: {exc}") from exc
    logger.debug("Tolerance overrides from %s: %s", path, overrides)
    return tolerances


def threads_from_env() -> int:
    """Read the worker thread cap from the environment.

    Returns:
        The number of threads, 1 when unset.

    Raises:
        ConfigError: If the value is not a positive integer.
    """
    value = os.environ.get(THREADS_ENV_NAME, "1")
    try:
        threads = int(value)
    except ValueError as exc:
        raise ConfigError(f"Invalid {THREADS_ENV_NAME}: {value!r}") from exc
    if threads < 1:
        raise ConfigError(f"Invalid {THREADS_ENV_NAME}: {value!r}")
    return threads


def log_level_from_env() -> int:
    """Read the log level from the environment.

    Returns:
        The logging level, WARNING when unset.

    Raises:
        ConfigError: If the log level is invalid.
    """
    level_name_mapping = {
        "CRITICAL": logging.CRITICAL,
        "FATAL": logging.FATAL,
        "ERROR": logging.ERROR,
        "WARN": logging.WARNING,
        "WARNING": logging.WARNING,
        "INFO": logging.INFO,
        "DEBUG": logging.DEBUG,
        "NOTSET": logging.NOTSET,
    }
    level_name = os.environ.get(LOG_LEVEL_ENV_NAME, "WARNING")
    try:
        return level_name_mapping[level_name]
    except KeyError as exc:
        raise ConfigError(f"Invalid log level: {level_name}") from exc
