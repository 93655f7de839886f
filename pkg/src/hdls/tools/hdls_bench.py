import argparse
import sys
from typing import List, Optional

from hdls.core.bench import (
    ALGORITHMS,
    BenchConfig,
    BenchReport,
    KFoldReport,
    default_methods,
    run_bench,
    run_kfold_prediction,
)
from hdls.core.datagen import DEFAULT_SNR, EXAMPLES
from hdls.core.records import RecordFile
from hdls.core.table import CsvFile
from hdls.tools.common import (
    EXIT_OK,
    add_common_arguments,
    add_ingestion_arguments,
    configure_logging,
    ingestion_spec,
    resolve_threads,
    run_guarded,
)
from hdls.tools.hdls_fit import build_rule


def parse_methods(text: str) -> List[str]:
    """Splits a comma-separated method list and checks every name."""
    names = [name.strip() for name in text.split(",") if name.strip()]
    unknown = [name for name in names if name not in ALGORITHMS]
    if not names or unknown:
        raise argparse.ArgumentTypeError(f"methods must be a comma-separated subset of {ALGORITHMS}")
    return names


def bench_synthetic(args: argparse.Namespace) -> BenchReport:
    """Runs the replicated benchmark on a synthetic example and prints its table."""
    rule = build_rule(args.stage1, args.d, args.gamma, args.stage2, args.delta, args.kappa)
    cfg = BenchConfig(
        example=args.example,
        n=args.n,
        p=args.p,
        replicates=args.reps,
        methods=default_methods(args.methods, rule),
        base_seed=args.seed,
        output_path=args.out,
        snr=args.snr,
        n_jobs=resolve_threads(args.threads, -1),
    )
    report = run_bench(cfg)
    print(f"Example ({args.example}), (n, p) = ({args.n}, {args.p}), {args.reps} replicate(s)")
    print(report.table())
    return report


def bench_file(args: argparse.Namespace) -> KFoldReport:
    """Runs the K-fold prediction protocol on an ingested CSV file and prints its table."""
    csv_file = CsvFile(args.input)
    x, y, _ = csv_file.ingest(ingestion_spec(args, csv_file.path))
    rule = build_rule(args.stage1, args.d, args.gamma, args.stage2, args.delta, args.kappa)
    report = run_kfold_prediction(x, y, default_methods(args.methods, rule), folds=args.folds, seed=args.seed)
    if args.out is not None:
        RecordFile(args.out).write_records(
            [{"kind": "fold", **row} for row in report.rows.to_dict(orient="records")]
            + [{"kind": "summary", **row} for row in report.summary.to_dict(orient="records")]
        )
    print(f"{args.folds}-fold prediction on {csv_file.path} ({x.shape[0]} rows, {x.shape[1]} features)")
    print(report.table())
    return report


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        description=(
            "Benchmark LAT/RAT on a synthetic example (replicated Monte Carlo) or on a "
            "CSV file (K-fold prediction error)."
        )
    )
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--example", choices=sorted(EXAMPLES), help="Synthetic example to replicate.")
    source.add_argument("--input", type=str, help="CSV file for the K-fold prediction protocol.")
    parser.add_argument("--n", type=int, default=200, help="Rows per replicate (default: 200).")
    parser.add_argument("--p", type=int, default=1000, help="Columns per replicate (default: 1000).")
    parser.add_argument("--reps", type=int, default=10, help="Number of replicates (default: 10).")
    parser.add_argument("--snr", type=float, default=DEFAULT_SNR, help="Signal-to-noise ratio (default: 2.3).")
    parser.add_argument(
        "--methods", type=parse_methods, default=["lat", "rat"], help="Comma-separated methods (default: lat,rat)."
    )
    parser.add_argument("--d", type=int, default=None, help="Stage-1 submodel size (default: floor(0.3 n)).")
    parser.add_argument("--delta", type=float, default=0.5, help="Threshold parameter delta (default: 0.5).")
    parser.add_argument("--stage1", choices=["topd", "ebic"], default="topd", help="Stage-1 selection.")
    parser.add_argument("--gamma", type=float, default=1.0, help="eBIC parameter (default: 1).")
    parser.add_argument(
        "--stage2", choices=["threshold", "gaussian", "bic"], default="threshold", help="Stage-2 selection."
    )
    parser.add_argument("--kappa", type=float, default=None, help="Condition number for --stage2 gaussian.")
    parser.add_argument("--folds", type=int, default=10, help="Folds for --input (default: 10).")
    add_ingestion_arguments(parser, "Response column for --input (default: y).")
    parser.add_argument("--seed", type=int, default=0, help="Base seed (default: 0).")
    parser.add_argument(
        "--threads", type=int, default=None, help="Worker count (default: HDLS_THREADS or all cores)."
    )
    parser.add_argument("-o", "--out", type=str, default=None, help="Optional `.jsonl` report path.")
    add_common_arguments(parser)

    args = parser.parse_args(argv)
    configure_logging(args.verbose)

    def command() -> int:
        if args.example is not None:
            bench_synthetic(args)
        else:
            bench_file(args)
        return EXIT_OK

    return run_guarded(command)


if __name__ == "__main__":
    sys.exit(main())
