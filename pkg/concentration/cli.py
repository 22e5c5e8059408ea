#  Copyright 2025 Canonical Ltd.
#  See LICENSE file for licensing details.

"""Compute entanglement concentration rates and finite-size performance from Schmidt spectra.

Inputs are JSON documents, outputs are JSON documents or tidy CSV tables.
"""
import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Optional, Sequence, TypeVar

import pandas as pd
from pydantic import BaseModel, ValidationError

from concentration import (
    asymptotics,
    info_spectrum,
    large_deviations,
    majorization,
    protocols,
    randomness,
    selftest,
    thermal,
)
from concentration.asymptotics import (
    AsymptoticsError,
    DomainError,
    FeasibilityError,
    ParameterError,
)
from concentration.config import (
    DEFAULT_SEED,
    ConfigError,
    Grid,
    LogBase,
    OutputFormat,
    RunConfig,
    load_tolerances,
    threads_from_env,
)
from concentration.info_spectrum import Quantity, RateEstimationError, SpectrumSequence
from concentration.large_deviations import SlopeOrderError
from concentration.parse import (
    ParseError,
    document_to_mgf,
    document_to_partition_function,
    document_to_partition_map,
    document_to_spectrum,
    load_document,
)
from concentration.protocols import ProtocolError
from concentration.randomness import PartitionMapError
from concentration.spectra import SpectrumError, WeightedSpectrum, iid_product
from concentration.thermal import PartitionFunctionError

SUCCESS_EXIT_CODE = 0
INPUT_ERROR_EXIT_CODE = 2
DOMAIN_ERROR_EXIT_CODE = 3

INPUT_ERRORS = (
    ParseError,
    ConfigError,
    ValidationError,
    SpectrumError,
    ProtocolError,
    PartitionMapError,
    PartitionFunctionError,
    ParameterError,
)
DOMAIN_ERRORS = (
    DomainError,
    FeasibilityError,
    RateEstimationError,
    SlopeOrderError,
    AsymptoticsError,
)

RATE_FORMULAS = ("const", "fail", "succ-p", "succ-d", "zeta", "zeta-c")
T = TypeVar("T")

logger = logging.getLogger(__name__)


class Table(BaseModel):
    """The result of a subcommand.

    Attributes:
        columns: The column names, in output order.
        rows: One mapping per row.
        rate_columns: The columns holding rates or exponents, converted by the log base.
        single: Whether the result is one record rather than a sweep.
    """

    columns: list[str]
    rows: list[dict[str, Any]]
    rate_columns: frozenset[str] = frozenset()
    single: bool = False


def _sweep(config: RunConfig, function: Callable[[float], T], points: Sequence[float]) -> list[T]:
    """Evaluate a function on grid points, in order.

    Args:
        config: The run configuration.
        function: The function of one grid point.
        points: The grid points.

    Returns:
        The values in the order of the points.
    """
    logger.debug("Sweeping %d points on %d threads", len(points), config.threads)
    if config.threads == 1:
        return [function(point) for point in points]
    with ThreadPoolExecutor(max_workers=config.threads) as executor:
        return list(executor.map(function, points))


def _points(config: RunConfig, scalar: str, grid: str = "sweep") -> tuple[list[float], bool]:
    """Collect the points of a sweep or a single scalar parameter.

    Args:
        config: The run configuration.
        scalar: The name of the scalar parameter.
        grid: The name of the grid.

    Returns:
        The points and whether a single scalar was given.

    Raises:
        ConfigError: If neither or both are given.
    """
    has_scalar = scalar in config.parameters
    if has_scalar == (grid in config.grids):
        raise ConfigError(f"Give exactly one of --{scalar} and --{grid}.")
    if has_scalar:
        return [config.parameters[scalar]], True
    return config.grids[grid].points(), False


def _spectrum(config: RunConfig, role: str) -> WeightedSpectrum:
    """Load a spectrum input.

    Args:
        config: The run configuration.
        role: The input role.

    Returns:
        The spectrum, renormalized within the configured tolerance.
    """
    return document_to_spectrum(
        load_document(config.inputs[role]),
        tolerance=config.tolerances.normalization,
        cap=config.tolerances.enumeration_cap,
    )


def _protocol(config: RunConfig) -> Table:
    """Evaluate probabilistic or deterministic protocols.

    Args:
        config: The run configuration.

    Returns:
        One row per threshold or the report for one size.
    """
    sp = _spectrum(config, "spectrum")
    columns = ["threshold_x", "size", "failure", "fidelity"]
    snap = config.tolerances.floor_snap
    if "size" in config.parameters:
        size = int(config.parameters["size"])
        if "deterministic" in config.flags:
            report = protocols.dflec_max_fidelity(sp, size)
        else:
            report = protocols.min_failure_for_size(sp, size)
        return Table(columns=columns, rows=[report.model_dump()], single=True)
    xs, single = _points(config, "x")
    reports = _sweep(config, lambda x: protocols.optimal_pflec(sp, x, snap=snap), xs)
    return Table(columns=columns, rows=[report.model_dump() for report in reports], single=single)


def _majorize(config: RunConfig) -> Table:
    """Decide majorization and LOCC convertibility.

    Args:
        config: The run configuration.

    Returns:
        One record.
    """
    source = _spectrum(config, "source")
    target = _spectrum(config, "target")
    tolerance = config.tolerances.prefix
    row = {
        "source_majorizes_target": majorization.majorizes(source, target, tolerance),
        "target_majorizes_source": majorization.majorizes(target, source, tolerance),
        "locc_transformable": majorization.locc_transformable(source, target, tolerance),
        "first_violation": majorization.first_violation(target, source, tolerance),
    }
    return Table(columns=list(row), rows=[row], single=True)


def _spectrum_rates(config: RunConfig) -> Table:
    """Evaluate finite-n quantities, or their empirical limits over a range of n.

    Args:
        config: The run configuration.

    Returns:
        One row per threshold rate.
    """
    base = _spectrum(config, "iid")
    a_values, single = _points(config, "a")
    cap = config.tolerances.enumeration_cap
    if "n_grid" in config.grids:
        n_range = sorted({int(round(n)) for n in config.grids["n_grid"].points()})
        seq = SpectrumSequence.iid(base, n_range, cap=cap)
        quantity = Quantity(config.options.get("quantity", Quantity.ZETA_C.value))
        for n in n_range:
            seq.spectrum(n)
        estimates = _sweep(
            config, lambda a: info_spectrum.empirical_rate(seq, quantity, a), a_values
        )
        rows = [
            {"a": a, "quantity": quantity.value, "slope": est.slope, "residual": est.residual}
            for a, est in zip(a_values, estimates)
        ]
        return Table(
            columns=["a", "quantity", "slope", "residual"],
            rows=rows,
            rate_columns=frozenset({"a"} if quantity == Quantity.K else {"a", "slope"}),
            single=single,
        )
    if "n" not in config.parameters:
        raise ConfigError("Give --n or --n-grid.")
    n = int(config.parameters["n"])
    sp = iid_product(base, n, cap=cap)

    def row(a: float) -> dict[str, Any]:
        quantities = info_spectrum.finite_quantities(sp, n, a)
        values = {"a": a, "n": n, Quantity.K.value: info_spectrum.K_n(sp, n, a)}
        values.update({key: float(rate) for key, rate in quantities})
        return values

    rows = _sweep(config, row, a_values)
    columns = ["a", "n", "K", "zeta_n", "zeta_c_n", "eta_n", "zeta_half_n", "zeta_c_half_n"]
    return Table(
        columns=columns,
        rows=rows,
        rate_columns=frozenset(set(columns) - {"n", "K"}),
        single=single,
    )


def _rate_value(
    config: RunConfig, profile: asymptotics.RenyiProfile, point: float
) -> tuple[float, bool]:
    """Evaluate one formula of the rates subcommand.

    Args:
        config: The run configuration.
        profile: The profile.
        point: The parameter value.

    Returns:
        The value and whether it was clamped.
    """
    formula = config.options["formula"]
    if formula == "const":
        return profile.h_plus, False
    if formula == "fail":
        return asymptotics.rate_failure_exponent(profile, point), False
    if formula == "succ-p":
        return asymptotics.rate_success_exponent_pflec(profile, point), False
    if formula == "succ-d":
        return asymptotics.rate_success_exponent_dflec(profile, point), False
    if formula == "zeta":
        rate = asymptotics.zeta_asymptotic(profile, point, clamp=config.clamp)
    else:
        rate = asymptotics.zeta_c_asymptotic(profile, point)
    return rate.value, rate.clamped


def _rates(config: RunConfig) -> Table:
    """Evaluate closed-form i.i.d. rates and exponents.

    Args:
        config: The run configuration.

    Returns:
        One row per parameter value.

    Raises:
        ConfigError: If the parameter does not fit the formula.
    """
    formula = config.options["formula"]
    scalar = {"const": "eps", "zeta": "a", "zeta-c": "a"}.get(formula, "r")
    stray = {"eps", "a", "r"} - {scalar}
    if stray & set(config.parameters):
        raise ConfigError(f"Formula {formula} takes --{scalar}, not {sorted(stray)}")
    points, single = _points(config, scalar)
    profile = asymptotics.profile_from_spectrum(_spectrum(config, "iid"))
    values = _sweep(config, lambda point: _rate_value(config, profile, point), points)
    rows = [
        {"formula": formula, "parameter": point, "value": value, "clamped": clamped}
        for point, (value, clamped) in zip(points, values)
    ]
    return Table(
        columns=["formula", "parameter", "value", "clamped"],
        rows=rows,
        rate_columns=frozenset({"value"} if formula == "const" else {"parameter", "value"}),
        single=single,
    )


def _thermal(config: RunConfig) -> Table:
    """Evaluate the rates of a thermal reduced state.

    Args:
        config: The run configuration.

    Returns:
        One row per exponent r.
    """
    pf = document_to_partition_function(load_document(config.inputs["levels"]))
    beta0 = config.parameters["beta0"]
    if "r" not in config.parameters and "sweep" not in config.grids:
        config = config.model_copy(update={"parameters": {**config.parameters, "r": 0.0}})
    r_values, single = _points(config, "r")
    results = _sweep(config, lambda r: thermal.thermal_rates(pf, beta0, r), r_values)
    rows = []
    for result in results:
        row = result.model_dump(exclude={"b_const_bracket"})
        row["b_const_lower"], row["b_const_upper"] = result.b_const_bracket
        rows.append(row)
    columns = [
        "beta0",
        "r",
        "b_const",
        "b_const_lower",
        "b_const_upper",
        "b_fail",
        "b_succ_p",
        "b_succ_d",
        "r_half",
    ]
    return Table(
        columns=columns, rows=rows, rate_columns=frozenset(columns[1:]), single=single
    )


def _ldp(config: RunConfig) -> Table:
    """Evaluate the rate function and tail exponents of a log-moment function.

    Args:
        config: The run configuration.

    Returns:
        One row per threshold.
    """
    mgf = document_to_mgf(load_document(config.inputs["mgf"]))
    constants = large_deviations.slope_constants(mgf)
    a_values, single = _points(config, "a")

    def row(a: float) -> dict[str, Any]:
        tails = large_deviations.tail_exponents(mgf, a)
        values = {"a": a, "rate_function": float(large_deviations.rate_function(mgf, a))}
        values.update({key: float(rate) for key, rate in tails})
        values.update(constants.model_dump())
        return values

    exponents = ["rate_function", "upper_ge", "upper_gt", "lower_le", "lower_lt"]
    return Table(
        columns=["a", *exponents, "r1", "r2", "r3", "r4"],
        rows=_sweep(config, row, a_values),
        rate_columns=frozenset(exponents),
        single=single,
    )


def _randomness(config: RunConfig) -> Table:
    """Evaluate a partition map against the uniform distribution.

    Args:
        config: The run configuration.

    Returns:
        One record.

    Raises:
        ConfigError: If neither a map nor a bucket count is given.
    """
    sp = _spectrum(config, "spectrum")
    if "map" in config.inputs and "greedy" in config.flags:
        raise ConfigError("Give either --map or --greedy.")
    if "map" in config.inputs:
        pm = document_to_partition_map(load_document(config.inputs["map"]))
    elif "M" in config.parameters:
        pm = randomness.greedy_partition(sp, int(config.parameters["M"]))
    else:
        raise ConfigError("Give --M or --map.")
    report = randomness.duality_check(sp, pm)
    row: dict[str, Any] = {"M": pm.bucket_count, **report.model_dump()}
    row["kl_deficit"] = randomness.kl_deficit(sp, pm)
    columns = list(row)
    rate_columns = {"kl_deficit"}
    if "eps" in config.parameters:
        bounds = randomness.randomness_bounds(
            asymptotics.profile_from_spectrum(sp),
            config.parameters["eps"],
            config.parameters.get("r", 0.0),
        )
        bound_values = bounds.model_dump()
        row.update(bound_values)
        columns.extend(bound_values)
        rate_columns |= {"r", "b_h", "b_e_h", "b_star_e_h", "b_kl"}
    return Table(columns=columns, rows=[row], rate_columns=frozenset(rate_columns), single=True)


def _selftest(config: RunConfig) -> Table:
    """Run the invariant suite.

    Args:
        config: The run configuration.

    Returns:
        One row per check.
    """
    checks = selftest.run_selftest(config.seed)
    return Table(
        columns=["name", "passed", "detail"], rows=[check.model_dump() for check in checks]
    )


SUBCOMMANDS: dict[str, Callable[[RunConfig], Table]] = {
    "protocol": _protocol,
    "majorize": _majorize,
    "spectrum-rates": _spectrum_rates,
    "rates": _rates,
    "thermal": _thermal,
    "ldp": _ldp,
    "randomness": _randomness,
    "selftest": _selftest,
}


def _scaled(table: Table, log_base: LogBase) -> Table:
    """Convert the rate columns of a table into the requested unit.

    Args:
        table: The table in nats.
        log_base: The unit.

    Returns:
        The converted table.
    """
    if log_base == LogBase.NATS:
        return table
    rows = [
        {
            key: value * log_base.scale if key in table.rate_columns else value
            for key, value in row.items()
        }
        for row in table.rows
    ]
    return table.model_copy(update={"rows": rows})


def render(table: Table, output_format: OutputFormat) -> str:
    """Serialize a table.

    Args:
        table: The table.
        output_format: The format.

    Returns:
        The serialized output.
    """
    if output_format == OutputFormat.CSV:
        return pd.DataFrame(table.rows, columns=table.columns).to_csv(index=False)
    ordered = [{column: row[column] for column in table.columns} for row in table.rows]
    return json.dumps(ordered[0] if table.single else ordered, indent=2) + "\n"


def run(config: RunConfig) -> int:
    """Run one subcommand and write its output.

    Args:
        config: The run configuration.

    Returns:
        The exit code: 0 on success, 2 on invalid input, 3 on a numerical-domain error.
    """
    logger.info("Running %s", config.subcommand)
    try:
        table = _scaled(SUBCOMMANDS[config.subcommand](config), config.log_base)
    except INPUT_ERRORS as exc:
        logger.error("Invalid input for %s: %s", config.subcommand, exc)
        print(f"{exc}", file=sys.stderr)
        return INPUT_ERROR_EXIT_CODE
    except DOMAIN_ERRORS as exc:
        logger.error("Numerical domain error in %s: %s", config.subcommand, exc)
        print(f"{exc}", file=sys.stderr)
        return DOMAIN_ERROR_EXIT_CODE
    output = render(table, config.output_format)
    if config.output is None:
        sys.stdout.write(output)
    else:
        config.output.write_text(output, encoding="utf-8")
        logger.info("Wrote %d rows to %s", len(table.rows), config.output)
    if config.subcommand == "selftest" and not all(row["passed"] for row in table.rows):
        return DOMAIN_ERROR_EXIT_CODE
    return SUCCESS_EXIT_CODE


def _common_parser() -> argparse.ArgumentParser:
    """Build the options shared by every subcommand.

    Returns:
        The parent parser.
    """
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--output", type=Path, help="Write the result to this file.")
    parser.add_argument(
        "--csv", type=Path, help="Write the result as CSV to this file (sets --format csv)."
    )
    parser.add_argument(
        "--format", choices=[fmt.value for fmt in OutputFormat], help="The output format."
    )
    parser.add_argument("--bits", action="store_true", help="Report rates in bits.")
    parser.add_argument(
        "--seed", type=int, default=DEFAULT_SEED, help="The seed of randomized oracles."
    )
    parser.add_argument("--tolerances", type=Path, help="A YAML file of tolerance overrides.")
    parser.add_argument(
        "--no-clamp",
        action="store_true",
        help="Fail instead of clamping zeta outside the interval on which it is stated.",
    )
    parser.add_argument("--sweep", type=str, help="A parameter grid min:max:step.")
    return parser


def _build_parser() -> argparse.ArgumentParser:
    """Build the command line parser.

    Returns:
        The parser.
    """
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="concentrate", description=__doc__)
    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    protocol = subparsers.add_parser(
        "protocol", parents=[common], help="Finite-size protocol performance."
    )
    protocol.add_argument("--spectrum", type=Path, required=True)
    protocol.add_argument("--x", type=float, help="The threshold of a probabilistic protocol.")
    protocol.add_argument("--size", type=int, help="The size of the maximally entangled target.")
    protocol.add_argument(
        "--deterministic", action="store_true", help="Optimize the fidelity for --size."
    )

    majorize = subparsers.add_parser(
        "majorize", parents=[common], help="Majorization and LOCC convertibility."
    )
    majorize.add_argument("--source", type=Path, required=True)
    majorize.add_argument("--target", type=Path, required=True)

    spectrum_rates = subparsers.add_parser(
        "spectrum-rates", parents=[common], help="Finite-n information-spectrum quantities."
    )
    spectrum_rates.add_argument("--iid", type=Path, required=True)
    spectrum_rates.add_argument("--n", type=int, help="The number of copies.")
    spectrum_rates.add_argument("--n-grid", type=str, help="A grid of n for empirical limits.")
    spectrum_rates.add_argument("--a", type=float, help="The threshold rate.")
    spectrum_rates.add_argument(
        "--quantity",
        choices=[quantity.value for quantity in Quantity],
        default=Quantity.ZETA_C.value,
        help="The quantity whose limit is estimated over --n-grid.",
    )

    rates = subparsers.add_parser("rates", parents=[common], help="Asymptotic i.i.d. rates.")
    rates.add_argument("--iid", type=Path, required=True)
    rates.add_argument("--formula", choices=RATE_FORMULAS, required=True)
    rates.add_argument("--eps", type=float, help="The error level of the constant formula.")
    rates.add_argument("--r", type=float, help="The exponent.")
    rates.add_argument("--a", type=float, help="The threshold rate of zeta and zeta-c.")

    thermal_parser = subparsers.add_parser(
        "thermal", parents=[common], help="Rates of thermal reduced states."
    )
    thermal_parser.add_argument("--levels", type=Path, required=True)
    thermal_parser.add_argument("--beta0", type=float, required=True)
    thermal_parser.add_argument("--r", type=float, help="The exponent, 0 by default.")

    ldp = subparsers.add_parser("ldp", parents=[common], help="Large-deviation exponents.")
    ldp.add_argument("--mgf", type=Path, required=True)
    ldp.add_argument("--a", type=float, help="The threshold.")

    randomness_parser = subparsers.add_parser(
        "randomness", parents=[common], help="Intrinsic randomness duality."
    )
    randomness_parser.add_argument("--spectrum", type=Path, required=True)
    randomness_parser.add_argument("--M", type=int, help="The number of buckets.")
    randomness_parser.add_argument(
        "--greedy", action="store_true", help="Build the map greedily (the default)."
    )
    randomness_parser.add_argument("--map", type=Path, help="A partition map document.")
    randomness_parser.add_argument("--eps", type=float, help="Report rate bounds at eps.")
    randomness_parser.add_argument("--r", type=float, help="The exponent of the rate bounds.")

    subparsers.add_parser("selftest", parents=[common], help="Run the invariant suite.")
    return parser


def _to_config(args: argparse.Namespace) -> RunConfig:
    """Translate parsed arguments into a run configuration.

    Args:
        args: The parsed arguments.

    Returns:
        The run configuration.
    """
    values = vars(args)
    inputs = {
        role: values[role]
        for role in ("spectrum", "source", "target", "iid", "levels", "mgf", "map")
        if values.get(role) is not None
    }
    grids = {"sweep": Grid.parse(args.sweep)} if args.sweep else {}
    if values.get("n_grid"):
        grids["n_grid"] = Grid.parse(values["n_grid"])
    parameters = {
        name: float(values[name])
        for name in ("x", "size", "n", "a", "r", "eps", "beta0", "M")
        if values.get(name) is not None
    }
    options = {
        name: values[name] for name in ("formula", "quantity") if values.get(name) is not None
    }
    flags = {name for name in ("deterministic", "greedy") if values.get(name)}
    output_format = OutputFormat(args.format) if args.format else OutputFormat.JSON
    output = args.output
    if args.csv is not None:
        output, output_format = args.csv, OutputFormat.CSV
    return RunConfig(
        subcommand=args.subcommand,
        inputs=inputs,
        grids=grids,
        parameters=parameters,
        options=options,
        flags=flags,
        output=output,
        output_format=output_format,
        log_base=LogBase.BITS if args.bits else LogBase.NATS,
        seed=args.seed,
        clamp=not args.no_clamp,
        tolerances=load_tolerances(args.tolerances),
        threads=threads_from_env(),
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse the command line and run the subcommand.

    Args:
        argv: The arguments, sys.argv[1:] when None.

    Returns:
        The exit code.
    """
    args = _build_parser().parse_args(argv)
    try:
        config = _to_config(args)
    except (ConfigError, ValidationError) as exc:
        print(f"{exc}", file=sys.stderr)
        return INPUT_ERROR_EXIT_CODE
    return run(config)
