#  Copyright 2025 Canonical Ltd.
#  See LICENSE file for licensing details.

"""The main entry point for the concentrate command line."""
import logging
import sys

from concentration.cli import INPUT_ERROR_EXIT_CODE, main
from concentration.config import ConfigError, log_level_from_env


def _set_up_logging() -> None:
    """Set up logging on standard error.

    Raises:
        ConfigError: If the log level is invalid.
    """
    root_logger = logging.getLogger()
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root_logger.handlers = [handler]
    root_logger.setLevel(log_level_from_env())


def run() -> None:  # pragma: no cover this is checked by integration tests
    """Run the command line and exit with its exit code."""
    try:
        _set_up_logging()
    except ConfigError as exc:
        print(f"{exc}", file=sys.stderr)
        sys.exit(INPUT_ERROR_EXIT_CODE)
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover this is checked by integration tests
    run()
