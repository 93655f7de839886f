import argparse
import sys
from pathlib import Path
from typing import List, Optional, Union

from hdls.core.datagen import DEFAULT_SNR, EXAMPLES, SyntheticInstance, gen_example
from hdls.core.table import CsvFile
from hdls.tools.common import EXIT_OK, add_common_arguments, configure_logging, run_guarded


def write_example(
    which: str,
    n: int,
    p: int,
    output_path: Union[str, Path],
    snr: float = DEFAULT_SNR,
    seed: int = 0,
    sigma: Optional[float] = None,
) -> SyntheticInstance:
    """
    Generates a synthetic example and writes it as a CSV matrix with columns
    x0..x{p-1} followed by the response y.

    Parameters
    ----------
    which:
        Example name ("i" to "iv").
    n, p:
        Shape of the design.
    output_path:
        Path to the `.csv` file to write.
    snr:
        Signal-to-noise ratio.
    seed:
        Generator seed.
    sigma:
        Optional noise level overriding the SNR calibration.
    """
    instance = gen_example(which, n, p, snr=snr, seed=seed, sigma=sigma)
    CsvFile(output_path, must_exist=False).write_matrix(instance.x, instance.y)
    print(
        f"Wrote example ({which}) with (n, p) = ({n}, {p}), sigma = {instance.sigma:.4f}, "
        f"true support {instance.true_support.tolist()} to {output_path}."
    )
    return instance


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Write a synthetic regression example to CSV.")
    parser.add_argument("example", choices=sorted(EXAMPLES), help="Example to generate.")
    parser.add_argument("output_path", type=str, help="Path of the `.csv` file to write.")
    parser.add_argument("--n", type=int, default=200, help="Number of rows (default: 200).")
    parser.add_argument("--p", type=int, default=1000, help="Number of predictors (default: 1000).")
    parser.add_argument("--snr", type=float, default=DEFAULT_SNR, help="Signal-to-noise ratio (default: 2.3).")
    parser.add_argument("--sigma", type=float, default=None, help="Noise level overriding --snr.")
    parser.add_argument("--seed", type=int, default=0, help="Generator seed (default: 0).")
    add_common_arguments(parser)

    args = parser.parse_args(argv)
    configure_logging(args.verbose)

    def command() -> int:
        write_example(args.example, args.n, args.p, args.output_path, args.snr, args.seed, args.sigma)
        return EXIT_OK

    return run_guarded(command)


if __name__ == "__main__":
    sys.exit(main())
