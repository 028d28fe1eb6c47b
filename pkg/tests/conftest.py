"""Shared fixtures for the test suite."""

from pathlib import Path

import numpy as np
import pytest

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def synthetic_csv() -> Path:
    return DATA_DIR / "synthetic.csv"


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)


def make_blobs(n_per: int, p: int, gap: float, seed: int):
    """Two spherical Gaussian classes separated along the first coordinate."""
    gen = np.random.default_rng(seed)
    x1 = gen.normal(size=(n_per, p))
    x2 = gen.normal(size=(n_per, p))
    x1[:, 0] -= gap / 2.0
    x2[:, 0] += gap / 2.0
    X = np.vstack([x1, x2])
    y = np.array([1] * n_per + [2] * n_per, dtype=np.int64)
    order = gen.permutation(2 * n_per)
    return X[order], y[order]
