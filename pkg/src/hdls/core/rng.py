"""Seeded random streams for reproducible simulations.

All randomness in hdls comes from numpy's counter-based Philox bit generator
keyed by a SeedSequence built from a 64-bit base seed plus integer keys, so a
stream for (seed, replicate) or (seed, fold) does not depend on the order in
which streams are created.
"""

import numpy as np

GENERATOR_NAME = "numpy.random.Philox"


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """
    Generator for the stream identified by seed and keys.

    Parameters
    ----------
    seed:
        Nonnegative base seed (up to 64 bits).
    keys:
        Extra nonnegative integers (replicate index, fold index, ...).
    """
    if seed < 0 or any(k < 0 for k in keys):
        raise ValueError("Seeds and stream keys must be nonnegative integers.")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


def fingerprint() -> str:
    """Generator and library versions that determine the random streams."""
    return f"{GENERATOR_NAME} (numpy {np.__version__})"
