import argparse
import sys
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from hdls.core.errors import SingularSystem
from hdls.core.linalg import ridge_dual_solve, ridge_primal_solve
from hdls.core.rng import make_rng
from hdls.tools.common import EXIT_OK, EXIT_TOLERANCE, add_common_arguments, configure_logging, run_guarded

DEFAULT_SHAPES = ((5, 3), (10, 40), (30, 100), (50, 200))
DEFAULT_RIDGES = (1e-4, 0.1, 1.0, 10.0)
TOLERANCE = 1e-9


@dataclass
class IdentityCase:
    """One primal/dual comparison; discrepancy is None when the case was skipped."""

    n: int
    p: int
    r: float
    discrepancy: Optional[float]
    note: str = ""


def compare_solves(n: int, p: int, r: float, seed: int = 0) -> IdentityCase:
    """
    Solves a seeded random ridge problem in primal and dual form.

    The discrepancy is ||primal - dual||_inf / (1 + ||primal||_inf); it is None
    when one side is singular (r = 0 with p > n, or with n > p).
    """
    rng = make_rng(seed, n, p)
    x = rng.standard_normal((n, p))
    y = rng.standard_normal(n)
    try:
        dual = ridge_dual_solve(x, y, r).beta
    except SingularSystem:
        return IdentityCase(n, p, r, None, "dual side skipped: X X^T is singular")
    if r == 0 and p > n:
        return IdentityCase(n, p, r, None, "primal side skipped: X^T X is singular")
    try:
        primal = ridge_primal_solve(x, y, r).beta
    except SingularSystem:
        return IdentityCase(n, p, r, None, "primal side skipped: X^T X is singular")
    discrepancy = float(np.max(np.abs(primal - dual)) / (1.0 + np.max(np.abs(primal))))
    return IdentityCase(n, p, r, discrepancy)


def check_identity(
    shapes: Sequence[Tuple[int, int]] = DEFAULT_SHAPES,
    ridges: Sequence[float] = DEFAULT_RIDGES,
    seed: int = 0,
) -> List[IdentityCase]:
    """Runs compare_solves over every shape and ridge value."""
    return [compare_solves(n, p, r, seed) for n, p in shapes for r in ridges]


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        description=(
            "Check (X^T X + r I)^{-1} X^T y == X^T (X X^T + r I)^{-1} y on seeded random data."
        )
    )
    parser.add_argument("--n", type=int, default=None, help="Rows; with --p replaces the default shape grid.")
    parser.add_argument("--p", type=int, default=None, help="Columns; with --n replaces the default shape grid.")
    parser.add_argument("--r", type=float, default=None, help="Ridge value replacing the default grid.")
    parser.add_argument("--seed", type=int, default=0, help="Seed (default: 0).")
    add_common_arguments(parser)

    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    if (args.n is None) != (args.p is None):
        parser.error("--n and --p must be given together")

    def command() -> int:
        shapes = DEFAULT_SHAPES if args.n is None else ((args.n, args.p),)
        ridges = DEFAULT_RIDGES if args.r is None else (args.r,)
        cases = check_identity(shapes, ridges, args.seed)

        compared = [case for case in cases if case.discrepancy is not None]
        for case in cases:
            if case.discrepancy is None:
                print(f"(n, p, r) = ({case.n}, {case.p}, {case.r:g}): {case.note}")
        if not compared:
            print("No case had both sides defined; nothing to compare.")
            return EXIT_OK

        worst = max(compared, key=lambda case: case.discrepancy)
        print(
            f"max relative discrepancy {worst.discrepancy:.3e} over {len(compared)} case(s) "
            f"(worst at (n, p, r) = ({worst.n}, {worst.p}, {worst.r:g}))"
        )
        if worst.discrepancy > TOLERANCE:
            print(f"FAILED: discrepancy above {TOLERANCE:g}", file=sys.stderr)
            return EXIT_TOLERANCE
        return EXIT_OK

    return run_guarded(command)


if __name__ == "__main__":
    sys.exit(main())
