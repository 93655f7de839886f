import itertools
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from hdls.core.errors import MissingResponse, NonNumericCell, ParseError
from hdls.core.file import File
from hdls.core.linalg import CONSTANT_VARIANCE_TOL

logger = logging.getLogger(__name__)

INTERACTIONS = ("none", "all_pairs")


@dataclass(frozen=True)
class IngestionSpec:
    """
    How to turn a CSV table into a design matrix and response.

    Parameters
    ----------
    input_path:
        Path to the `.csv` file.
    response_column:
        Name of the response column, or its zero-based position.
    has_header:
        Whether the first row holds column names. Without a header, columns
        are named by position.
    categorical_columns:
        Raw columns to one-hot encode. None auto-detects non-numeric columns.
    interactions:
        "none" or "all_pairs" (products of every pair of distinct features
        after encoding).
    drop_constant:
        Drop features that are constant over all rows.
    exclude_columns:
        Raw columns removed before encoding and expansion.
    """

    input_path: Union[str, Path]
    response_column: Union[str, int] = "y"
    has_header: bool = True
    categorical_columns: Optional[Tuple[str, ...]] = None
    interactions: str = "none"
    drop_constant: bool = True
    exclude_columns: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.interactions not in INTERACTIONS:
            raise ValueError(
                f"interactions must be one of {INTERACTIONS}, got {self.interactions!r}."
            )


class CsvFile(File):
    """
    CSV table file (UTF-8, '.' decimal separator).

    Parameters
    ----------
    path:
        Path to the `.csv` file.
    must_exist:
        False when the file is about to be written.
    """

    extensions = (".csv",)

    def __init__(self, path: Union[str, Path], must_exist: bool = True):
        super().__init__(path, must_exist=must_exist)

    def read_frame(self, has_header: bool = True) -> pd.DataFrame:
        """Reads the table with lossless float parsing."""
        try:
            frame = pd.read_csv(
                self.path,
                header=0 if has_header else None,
                float_precision="round_trip",
                encoding="utf-8",
            )
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise ParseError(f"Could not parse {self.path}: {e}") from e
        if frame.empty:
            raise ParseError(f"{self.path} has no data rows.")
        if not has_header:
            frame.columns = [str(c) for c in frame.columns]
        return frame

    def write_matrix(
        self,
        x: np.ndarray,
        y: np.ndarray,
        feature_names: Optional[Sequence[str]] = None,
        response_name: str = "y",
    ):
        """
        Writes a design matrix and response, 17 significant digits per number.

        Parameters
        ----------
        x:
            Design matrix (n, p).
        y:
            Response (n,), written as the last column.
        feature_names:
            Column names; defaults to x0, x1, ...
        response_name:
            Header of the response column.
        """
        x = np.asarray(x, dtype=np.float64)
        if feature_names is None:
            feature_names = [f"x{j}" for j in range(x.shape[1])]
        frame = pd.DataFrame(x, columns=list(feature_names))
        frame[response_name] = np.asarray(y, dtype=np.float64)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(self.path, index=False, float_format="%.17g")
        logger.info("Wrote %d x %d matrix to %s", x.shape[0], x.shape[1], self.path)

    def ingest(self, spec: IngestionSpec) -> Tuple[np.ndarray, np.ndarray, List[str]]:
        """See `ingest`."""
        frame = self.read_frame(spec.has_header)
        response_name = _resolve_response(frame, spec.response_column)
        y = _numeric_column(frame[response_name], response_name)

        raw = frame.drop(columns=[response_name])
        missing = [c for c in spec.exclude_columns if c not in raw.columns]
        if missing:
            raise ParseError(f"Columns to exclude not found: {missing}")
        raw = raw.drop(columns=list(spec.exclude_columns))

        if spec.categorical_columns is None:
            categorical = [
                c for c in raw.columns if not pd.api.types.is_numeric_dtype(raw[c])
            ]
        else:
            categorical = list(spec.categorical_columns)
            unknown = [c for c in categorical if c not in raw.columns]
            if unknown:
                raise ParseError(f"Categorical columns not found: {unknown}")

        blocks = []
        for column in raw.columns:
            if column in categorical:
                levels = raw[column].astype(str)
                dummies = pd.get_dummies(
                    levels, prefix=str(column), prefix_sep="=", drop_first=True, dtype=float
                )
                logger.debug("Encoded %s into %d indicator column(s)", column, dummies.shape[1])
                blocks.append(dummies)
            else:
                blocks.append(
                    pd.DataFrame({str(column): _numeric_column(raw[column], column)})
                )
        if not blocks:
            raise ParseError("The table has no feature columns besides the response.")
        features = pd.concat(blocks, axis=1)
        names = [str(c) for c in features.columns]
        x = features.to_numpy(dtype=np.float64)

        if spec.interactions == "all_pairs":
            pairs = list(itertools.combinations(range(x.shape[1]), 2))
            if pairs:
                left, right = np.array(pairs).T
                x = np.hstack([x, x[:, left] * x[:, right]])
                names = names + [f"{names[a]}*{names[b]}" for a, b in pairs]
            logger.info("Added %d pairwise interaction features", len(pairs))

        if len(set(names)) != len(names):
            duplicates = sorted({name for name in names if names.count(name) > 1})
            raise ParseError(f"Feature names are not unique after expansion: {duplicates}")

        if spec.drop_constant:
            constant = x.var(axis=0, ddof=1) < CONSTANT_VARIANCE_TOL
            if constant.any():
                dropped = [name for name, flag in zip(names, constant) if flag]
                logger.info("Dropped %d constant feature(s): %s", len(dropped), dropped)
                x = x[:, ~constant]
                names = [name for name, flag in zip(names, constant) if not flag]

        logger.info("Ingested %d rows and %d features from %s", x.shape[0], x.shape[1], self.path)
        return x, y, names


def _resolve_response(frame: pd.DataFrame, response_column: Union[str, int]):
    if response_column in frame.columns:
        return response_column
    if isinstance(response_column, int) or str(response_column).isdigit():
        position = int(response_column)
        if 0 <= position < frame.shape[1]:
            return frame.columns[position]
    raise MissingResponse(
        f"Response column {response_column!r} not found among {list(frame.columns)}."
    )


def _numeric_column(series: pd.Series, name) -> np.ndarray:
    values = pd.to_numeric(series, errors="coerce").to_numpy(dtype=np.float64, na_value=np.nan)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        row = int(bad[0])
        raise NonNumericCell(f"Non-numeric or missing value {series.iloc[row]!r}", row=row, column=name)
    return values


def ingest(spec: IngestionSpec) -> Tuple[np.ndarray, np.ndarray, List[str]]:
    """
    Reads a CSV table into (x, y, feature_names).

    Categorical columns are one-hot encoded with the first level dropped,
    `all_pairs` appends the products of every pair of distinct encoded
    features, and constant features are dropped and logged.
    """
    return CsvFile(spec.input_path).ingest(spec)
