import pytest
import numpy as np
from pathlib import Path
from typing import Union

from hdls.core.rng import make_rng


TEST_DATA_DIR = Path(__file__).parent / "test_data"
TEST_OUTPUT_DATA_DIR = TEST_DATA_DIR / "output_data"


@pytest.fixture
def compare_file_bytes():
    """Fixture for comparing two files by their byte data."""

    def _compare(filepath_1: Union[str, Path], filepath_2: Union[str, Path]) -> bool:
        filepath_1 = Path(filepath_1)
        filepath_2 = Path(filepath_2)
        with open(filepath_1, "rb") as file_1, open(filepath_2, "rb") as file_2:
            return file_1.read() == file_2.read()

    return _compare


@pytest.fixture
def output_dir():
    """Output directory that is emptied after each test."""
    TEST_OUTPUT_DATA_DIR.mkdir(parents=True, exist_ok=True)

    yield TEST_OUTPUT_DATA_DIR

    for filepath in TEST_OUTPUT_DATA_DIR.iterdir():
        if filepath.is_file():
            filepath.unlink()


@pytest.fixture
def rng():
    """Seeded generator, fresh per test."""
    return make_rng(20240101)


def sparse_problem(n: int, p: int, support, values, seed: int = 0, noise: float = 0.0):
    """Gaussian design with y = x beta + noise * N(0, 1) for a given support."""
    gen = make_rng(seed)
    x = gen.standard_normal((n, p))
    beta = np.zeros(p)
    beta[list(support)] = values
    y = x @ beta + noise * gen.standard_normal(n)
    return x, y, beta
