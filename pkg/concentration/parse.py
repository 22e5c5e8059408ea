#  Copyright 2025 Canonical Ltd.
#  See LICENSE file for licensing details.

"""Module for parsing the JSON input documents of the command line."""
import json
from collections import namedtuple
from enum import Enum
from pathlib import Path
from typing import Any

from concentration import large_deviations, spectra
from concentration.large_deviations import LogMGF
from concentration.randomness import PartitionMap, PartitionMapError, parse_assignment
from concentration.spectra import SpectrumError, WeightedSpectrum
from concentration.thermal import PartitionFunction, PartitionFunctionError

ValidationResult = namedtuple("ValidationResult", ["is_valid", "msg"])


class ParseError(Exception):
    """An error occurred during the parsing of an input document."""


class MGFFamily(str, Enum):
    """The built-in logarithmic moment function families.

    Attributes:
        BERNOULLI: A two-point variable.
        GAUSSIAN: A normal variable.
        LINEAR: A constant variable.
        FROM_SPECTRUM: -log p_i for p_i drawn from a spectrum.
    """

    BERNOULLI = "bernoulli"
    GAUSSIAN = "gaussian"
    LINEAR = "linear"
    FROM_SPECTRUM = "from-spectrum"


def load_document(path: Path) -> Any:
    """Read and decode a JSON document.

    Args:
        path: The file to read.

    Returns:
        The decoded document.

    Raises:
        ParseError: If the file cannot be read or is not valid JSON.
    """
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"Could not read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"Invalid JSON in {path} at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc


def document_to_spectrum(
    document: Any,
    tolerance: float = spectra.NORMALIZATION_TOLERANCE,
    cap: int = spectra.DEFAULT_ENUMERATION_CAP,
) -> WeightedSpectrum:
    """Parse a spectrum document.

    A spectrum is either a plain list of values, {"values": [...]},
    {"entries": [[value, multiplicity], ...]} or {"iid": {"base": <spectrum>, "n": n}}.

    Args:
        document: The decoded document.
        tolerance: The deviation of the total from 1 that is silently rescaled.
        cap: The enumeration cap of i.i.d. products.

    Returns:
        The spectrum.

    Raises:
        ParseError: If the document is not a valid spectrum.
    """
    if isinstance(document, list):
        document = {"values": document}
    validation_result = _validate_one_of_keys(document, ("values", "entries", "iid"))
    if not validation_result.is_valid:
        raise ParseError(f"Could not parse spectrum: {validation_result.msg}")
    try:
        if "values" in document:
            return spectra.from_values(
                [float(value) for value in document["values"]], tolerance=tolerance
            )
        if "iid" in document:
            validation_result = _validate_missing_keys(document["iid"], ("base", "n"))
            if not validation_result.is_valid:
                raise ParseError(f"Could not parse i.i.d. spectrum: {validation_result.msg}")
            base = document_to_spectrum(document["iid"]["base"], tolerance=tolerance, cap=cap)
            return spectra.iid_product(base, int(document["iid"]["n"]), cap=cap)
        return spectra.from_entries(
            [(float(value), int(multiplicity)) for value, multiplicity in document["entries"]],
            tolerance=tolerance,
        )
    except (SpectrumError, TypeError, ValueError) as exc:
        raise ParseError(f"Could not parse spectrum: {exc}") from exc


def document_to_partition_function(document: Any) -> PartitionFunction:
    """Parse an energy level or partition function table document.

    Levels are given as [[energy, degeneracy], ...], a table as {"table": [[beta, xi], ...]}.

    Args:
        document: The decoded document.

    Returns:
        The partition function.

    Raises:
        ParseError: If the document is neither.
    """
    try:
        if isinstance(document, dict) and "table" in document:
            rows = [(float(beta), float(xi)) for beta, xi in document["table"]]
            return PartitionFunction.from_table([beta for beta, _ in rows], [xi for _, xi in rows])
        if isinstance(document, list):
            return PartitionFunction.from_levels(
                [(float(energy), int(degeneracy)) for energy, degeneracy in document]
            )
    except (PartitionFunctionError, TypeError, ValueError) as exc:
        raise ParseError(f"Could not parse partition function: {exc}") from exc
    raise ParseError("Expected a list of [energy, degeneracy] pairs or a {'table': ...} object")


def document_to_mgf(document: Any) -> LogMGF:
    """Parse a logarithmic moment function document.

    Args:
        document: The decoded document, e.g. {"family": "bernoulli", "q": 0.5}.

    Returns:
        The log-moment function.

    Raises:
        ParseError: If the family is unknown or its parameters are invalid.
    """
    validation_result = _validate_missing_keys(document, ("family",))
    if not validation_result.is_valid:
        raise ParseError(f"Could not parse moment function: {validation_result.msg}")
    try:
        family = MGFFamily(document["family"])
    except ValueError as exc:
        raise ParseError(f"Unknown moment function family {document['family']!r}") from exc

    try:
        if family == MGFFamily.BERNOULLI:
            return large_deviations.bernoulli(
                float(document["q"]),
                low=float(document.get("low", 0.0)),
                high=float(document.get("high", 1.0)),
            )
        if family == MGFFamily.GAUSSIAN:
            return large_deviations.gaussian(
                variance=float(document.get("variance", 1.0)),
                mean=float(document.get("mean", 0.0)),
            )
        if family == MGFFamily.LINEAR:
            return large_deviations.linear(float(document["c"]))
        return large_deviations.from_spectrum(document_to_spectrum(document["spectrum"]))
    except KeyError as exc:
        raise ParseError(f"Missing parameter {exc} for family {family.value}") from exc
    except (TypeError, ValueError) as exc:
        raise ParseError(f"Invalid parameters for family {family.value}: {exc}") from exc


def document_to_partition_map(document: Any) -> PartitionMap:
    """Parse a partition map document.

    A map is either a plain list of bucket indices or {"assignment": [...], "M": m}; without
    "M" the number of buckets is one more than the largest index.

    Args:
        document: The decoded document.

    Returns:
        The partition map.

    Raises:
        ParseError: If the document is not a surjective map.
    """
    if isinstance(document, list):
        document = {"assignment": document}
    validation_result = _validate_missing_keys(document, ("assignment",))
    if not validation_result.is_valid:
        raise ParseError(f"Could not parse partition map: {validation_result.msg}")
    try:
        assignment = [int(bucket) for bucket in document["assignment"]]
        bucket_count = int(document.get("M", max(assignment, default=-1) + 1))
        return parse_assignment(assignment, bucket_count)
    except (PartitionMapError, TypeError, ValueError) as exc:
        raise ParseError(f"Could not parse partition map: {exc}") from exc


def _validate_missing_keys(document: Any, keys: tuple[str, ...]) -> ValidationResult:
    """Validate that a document is an object holding all the given keys.

    Args:
        document: The decoded document.
        keys: The required keys.

    Returns:
        (True, "") if all keys are there otherwise (False, error_msg).
    """
    if not isinstance(document, dict):
        return ValidationResult(False, f"expected a JSON object, got {type(document).__name__}")
    for expected_key in keys:
        if expected_key not in document:
            return ValidationResult(False, f"{expected_key} key not found in {document}")
    return ValidationResult(True, "")


def _validate_one_of_keys(document: Any, keys: tuple[str, ...]) -> ValidationResult:
    """Validate that a document is an object holding exactly one of the given keys.

    Args:
        document: The decoded document.
        keys: The alternative keys.

    Returns:
        (True, "") if exactly one key is there otherwise (False, error_msg).
    """
    if not isinstance(document, dict):
        return ValidationResult(False, f"expected a JSON object, got {type(document).__name__}")
    present = [key for key in keys if key in document]
    if len(present) != 1:
        return ValidationResult(False, f"expected exactly one of {keys}, found {present}")
    return ValidationResult(True, "")
