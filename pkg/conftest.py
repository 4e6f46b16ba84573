"""
Shared pytest fixtures
Seeded datasets, a small prebuilt index and a hand-sized breakpoint row set
"""

import numpy as np
import pytest

from src.core.datasets import gaussian_mixture
from src.core.index import build_index
from src.core.params import LshParams


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running statistical or scale checks")


@pytest.fixture(scope="session")
def small_data():
    return gaussian_mixture(2000, 32, clusters=8, spread=1.0, seed=7)


@pytest.fixture(scope="session")
def small_params():
    return LshParams.create(K=8, L=4, c=1.5, beta=0.1, n_regions=16, leaf_capacity=16, k=10)


@pytest.fixture(scope="session")
def small_index(small_data, small_params):
    return build_index(small_data, small_params, seed=3)


@pytest.fixture
def tiny_rows():
    """One dimension, N_r = 4, breakpoints 0..4"""
    return np.array([[0.0, 1.0, 2.0, 3.0, 4.0]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
