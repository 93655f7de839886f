import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Union

from hdls.core.pipeline import CvConfig, FitResult, lat, rat
from hdls.core.records import RecordFile
from hdls.core.selection import (
    BIC,
    EBIC,
    AnalyticThreshold,
    FixedSize,
    GaussianThreshold,
    SelectionRule,
)
from hdls.core.table import CsvFile, IngestionSpec
from hdls.tools.common import (
    EXIT_OK,
    add_common_arguments,
    add_ingestion_arguments,
    configure_logging,
    ingestion_spec,
    resolve_threads,
    run_guarded,
)

logger = logging.getLogger(__name__)


def build_rule(
    stage1: str = "topd",
    d: Optional[int] = None,
    gamma: float = 1.0,
    stage2: str = "threshold",
    delta: float = 0.5,
    kappa: Optional[float] = None,
) -> SelectionRule:
    """
    Builds a SelectionRule from command-line style options.

    Parameters
    ----------
    stage1:
        "topd" (fixed size d) or "ebic".
    d:
        Stage-1 size; None means floor(0.3 n).
    gamma:
        eBIC parameter.
    stage2:
        "threshold" (analytic), "gaussian" (Gaussian threshold, needs kappa)
        or "bic".
    delta:
        Threshold confidence parameter.
    kappa:
        Condition number used by the Gaussian-design threshold.
    """
    first = FixedSize(d) if stage1 == "topd" else EBIC(gamma=gamma)
    if stage2 == "threshold":
        second = AnalyticThreshold(delta)
    elif stage2 == "gaussian":
        if kappa is None:
            raise ValueError("--stage2 gaussian needs --kappa.")
        second = GaussianThreshold(delta, kappa)
    else:
        second = BIC()
    return SelectionRule(first, second)


def fit_file(
    spec: IngestionSpec,
    method: str = "lat",
    rule: Optional[SelectionRule] = None,
    ridge: Optional[float] = None,
    cv_folds: Optional[int] = None,
    seed: int = 0,
    output_path: Optional[Union[str, Path]] = None,
    threads: int = 1,
) -> FitResult:
    """
    Ingests a CSV file, fits LAT or RAT and writes the result record.

    Parameters
    ----------
    spec:
        How to read the `.csv` input.
    method:
        "lat" or "rat".
    rule:
        Selection strategy.
    ridge:
        Fixed RAT ridge parameter.
    cv_folds:
        RAT cross-validation folds. RAT without ridge or cv_folds uses 10-fold CV.
    seed:
        Seed of the CV fold assignment.
    output_path:
        Optional `.jsonl` path; the record is printed to stdout otherwise.
    threads:
        joblib workers for cross-validation.

    Returns
    -------
    result:
        The fit.
    """
    csv_file = CsvFile(spec.input_path)
    x, y, names = csv_file.ingest(spec)

    notes = []
    if method == "lat":
        result = lat(x, y, rule)
    elif ridge is not None:
        result = rat(x, y, rule, r=ridge)
    else:
        if cv_folds is None:
            cv_folds = 10
            notes.append("no --ridge or --cv given: tuned r by 10-fold CV on the default grid")
        result = rat(x, y, rule, cv=CvConfig(folds=cv_folds, seed=seed, n_jobs=threads))
    result.notes.extend(notes)

    record = result.to_record(names)
    record.update({"input": str(csv_file.path), "input_sha256": csv_file.checksum(), "seed": seed})
    if output_path is not None:
        RecordFile(output_path).write_records([record])
        print(f"Wrote {method.upper()} fit with {result.support.size} feature(s) to {output_path}.")
    else:
        print(RecordFile.encode(record))
    for note in result.notes:
        print(f"note: {note}", file=sys.stderr)
    return result


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        description="Fit a sparse linear model with LAT or RAT on a CSV table."
    )
    parser.add_argument("--input", type=str, required=True, help="Path to the CSV input file.")
    parser.add_argument("--method", choices=["lat", "rat"], default="lat", help="Fitting algorithm.")
    parser.add_argument("--d", type=int, default=None, help="Stage-1 submodel size (default: floor(0.3 n)).")
    parser.add_argument("--delta", type=float, default=0.5, help="Threshold parameter delta (default: 0.5).")
    ridge_group = parser.add_mutually_exclusive_group()
    ridge_group.add_argument("--ridge", type=float, default=None, help="Fixed RAT ridge parameter.")
    ridge_group.add_argument(
        "--cv", type=int, default=None, metavar="FOLDS", help="Tune the RAT ridge parameter by FOLDS-fold CV."
    )
    parser.add_argument("--stage1", choices=["topd", "ebic"], default="topd", help="Stage-1 selection.")
    parser.add_argument("--gamma", type=float, default=1.0, help="eBIC parameter for --stage1 ebic (default: 1).")
    parser.add_argument(
        "--stage2", choices=["threshold", "gaussian", "bic"], default="threshold", help="Stage-2 selection."
    )
    parser.add_argument("--kappa", type=float, default=None, help="Condition number for --stage2 gaussian.")
    add_ingestion_arguments(parser, "Response column name or position (default: y).")
    parser.add_argument("--seed", type=int, default=0, help="Seed for the CV fold assignment.")
    parser.add_argument("--threads", type=int, default=None, help="Worker count (default: HDLS_THREADS or 1).")
    parser.add_argument(
        "-o", "--out", type=str, default=None, help="Optional `.jsonl` output path; stdout if omitted."
    )
    add_common_arguments(parser)

    args = parser.parse_args(argv)
    configure_logging(args.verbose)

    def command() -> int:
        rule = build_rule(args.stage1, args.d, args.gamma, args.stage2, args.delta, args.kappa)
        fit_file(
            ingestion_spec(args, args.input),
            method=args.method,
            rule=rule,
            ridge=args.ridge,
            cv_folds=args.cv,
            seed=args.seed,
            output_path=args.out,
            threads=resolve_threads(args.threads, 1),
        )
        return EXIT_OK

    return run_guarded(command)


if __name__ == "__main__":
    sys.exit(main())
