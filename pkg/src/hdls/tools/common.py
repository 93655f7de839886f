import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Callable, Optional, Tuple, Union

import numpy as np

from hdls.core.errors import DataError
from hdls.core.table import IngestionSpec

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_DATA_ERROR = 2
EXIT_NUMERICAL_ERROR = 3

THREADS_ENV = "HDLS_THREADS"

logger = logging.getLogger("hdls.tools")


def add_common_arguments(parser: argparse.ArgumentParser):
    """Adds the -v/--verbose counter shared by every tool."""
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="Increase log detail on stderr (-v for INFO, -vv for DEBUG).",
    )


def split_names(text: Optional[str]) -> Tuple[str, ...]:
    """Comma-separated column names; None or an empty string gives ()."""
    if not text:
        return ()
    return tuple(name.strip() for name in text.split(",") if name.strip())


def add_ingestion_arguments(parser: argparse.ArgumentParser, response_help: str):
    """
    Adds the flags that control how a CSV table becomes a design matrix.

    Parameters
    ----------
    parser:
        The parser to extend.
    response_help:
        Help text of --response.
    """
    parser.add_argument("--response", type=str, default="y", help=response_help)
    parser.add_argument(
        "--no-header",
        dest="has_header",
        action="store_false",
        help="The first row is data; columns are named by zero-based position.",
    )
    parser.add_argument(
        "--categorical",
        type=str,
        default=None,
        help="Comma-separated columns to one-hot encode (default: every non-numeric column).",
    )
    parser.add_argument(
        "--interactions", choices=["none", "all_pairs"], default="none", help="Add pairwise interaction features."
    )
    parser.add_argument(
        "--keep-constant",
        dest="drop_constant",
        action="store_false",
        help="Keep features that are constant over all rows.",
    )
    parser.add_argument("--exclude", type=str, default=None, help="Comma-separated raw columns to leave out.")


def ingestion_spec(args: argparse.Namespace, input_path: Union[str, Path]) -> IngestionSpec:
    """IngestionSpec from the flags added by add_ingestion_arguments."""
    return IngestionSpec(
        input_path=input_path,
        response_column=args.response,
        has_header=args.has_header,
        categorical_columns=split_names(args.categorical) if args.categorical is not None else None,
        interactions=args.interactions,
        drop_constant=args.drop_constant,
        exclude_columns=split_names(args.exclude),
    )


def configure_logging(verbose: int):
    """Diagnostics go to stderr; summaries are printed to stdout."""
    level = logging.WARNING if verbose <= 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
        force=True,
    )


def resolve_threads(threads: Optional[int], default: int) -> int:
    """
    Worker count from --threads, else the HDLS_THREADS environment variable,
    else the given default (-1 means all cores, as in joblib).
    """
    if threads is not None:
        return threads
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            logger.warning("Ignoring non-integer %s=%r", THREADS_ENV, env)
    return default


def run_guarded(command: Callable[[], int]) -> int:
    """
    Runs a command body and maps hdls errors to exit codes: data errors and
    missing files to 2, numerical failures to 3.
    """
    try:
        return command()
    except (DataError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA_ERROR
    except np.linalg.LinAlgError as e:
        # LinAlgError subclasses ValueError, so it is caught first
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL_ERROR
    except ValueError as e:
        # Validation errors of configuration dataclasses
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA_ERROR
