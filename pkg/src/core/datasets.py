"""
Datasets
Loading, the hold-out query protocol and synthetic Gaussian mixtures
"""

import logging
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from src.core.errors import InvalidArgumentError
from src.core.input_validator import InputValidator
from src.core.vector_io import ELEMENT_TYPES, read_vectors

logger = logging.getLogger(__name__)


def load_matrix(path: Union[str, Path]) -> np.ndarray:
    """Read a dataset or query file (.fvecs/.bvecs/.ivecs or .npy) as float32"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    suffix = path.suffix.lstrip('.').lower()
    if suffix == 'npy':
        data = np.load(path)
    elif suffix in ELEMENT_TYPES:
        data = read_vectors(path, suffix)
    else:
        raise InvalidArgumentError(f"unsupported dataset format: {path.name}")
    return InputValidator.matrix(data, name=path.name).astype(np.float32, copy=False)


def holdout_split(data, count: int, seed: int = 42) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Remove `count` random rows to serve as queries.

    Returns (base, queries, held_positions); held positions index the
    original matrix, base keeps the remaining rows in original order.
    """
    data = InputValidator.matrix(data)
    count = InputValidator.positive_int(count, "count")
    n = data.shape[0]
    if count >= n:
        raise InvalidArgumentError(f"cannot hold out {count} of {n} points")

    rng = np.random.default_rng(seed)
    held = np.sort(rng.permutation(n)[:count])
    keep = np.ones(n, dtype=bool)
    keep[held] = False

    logger.info(f"Held out {count} queries, {n - count} points remain")
    return data[keep], data[held], held


def gaussian_mixture(n: int, d: int, clusters: int = 10, spread: float = 1.0,
                     seed: int = 42) -> np.ndarray:
    """n points around `clusters` centers drawn from N(0, 10^2); per-cluster noise N(0, spread^2)"""
    n = InputValidator.positive_int(n, "n")
    d = InputValidator.positive_int(d, "d")
    clusters = InputValidator.positive_int(clusters, "clusters")
    spread = InputValidator.positive_real(spread, "spread")

    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, 10.0, size=(clusters, d))
    labels = rng.integers(0, clusters, size=n)
    points = centers[labels] + rng.normal(0.0, spread, size=(n, d))
    return points.astype(np.float32)
