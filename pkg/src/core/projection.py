"""
Gaussian 2-stable projections
Hash family sampling, point/dataset projection and the PAA summaries used by DET-ONLY
"""

import logging
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np

from src.core.errors import InvalidArgumentError
from src.core.input_validator import InputValidator

logger = logging.getLogger(__name__)


@runtime_checkable
class Projector(Protocol):
    """Anything that maps d-dimensional points into L spaces of K dimensions"""

    d: int
    K: int
    L: int

    def project(self, points: np.ndarray) -> np.ndarray: ...

    def project_query(self, point: np.ndarray) -> np.ndarray: ...

    def radius_scale(self, epsilon: float) -> float: ...


@dataclass(frozen=True)
class HashFamily:
    """L x K Gaussian vectors a_ij, each of length d"""
    vectors: np.ndarray = field(repr=False)
    d: int
    K: int
    L: int
    seed: int

    def __post_init__(self):
        if self.vectors.shape != (self.L, self.K, self.d):
            raise InvalidArgumentError(
                f"hash vectors have shape {self.vectors.shape}, expected {(self.L, self.K, self.d)}"
            )
        self.vectors.setflags(write=False)

    def project(self, points: np.ndarray) -> np.ndarray:
        """(m, d) points -> (L, m, K) projected coordinates"""
        flat = self.vectors.reshape(self.L * self.K, self.d)
        out = np.asarray(points, dtype=np.float64) @ flat.T
        return out.reshape(-1, self.L, self.K).transpose(1, 0, 2)

    def project_query(self, point: np.ndarray) -> np.ndarray:
        """d-vector -> (L, K)"""
        return self.vectors @ point

    def radius_scale(self, epsilon: float) -> float:
        return epsilon


@dataclass(frozen=True)
class ProjectedDataset:
    """values[i][z] = H_i(o_z)"""
    values: np.ndarray = field(repr=False)

    @property
    def L(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def K(self) -> int:
        return self.values.shape[2]


def sample_hash_family(d: int, K: int, L: int, seed: int) -> HashFamily:
    """Draw L*K standard-normal vectors of length d, deterministic in seed"""
    d = InputValidator.positive_int(d, "d")
    K = InputValidator.positive_int(K, "K")
    L = InputValidator.positive_int(L, "L")
    rng = np.random.default_rng(seed)
    vectors = rng.standard_normal((L, K, d))
    logger.debug(f"Sampled hash family d={d} K={K} L={L} seed={seed}")
    return HashFamily(vectors=vectors, d=d, K=K, L=L, seed=int(seed))


def project_point(family: HashFamily, point, space: int) -> np.ndarray:
    """H_i(o) for zero-based space index i"""
    if not 0 <= space < family.L:
        raise InvalidArgumentError(f"space index {space} outside [0, {family.L})")
    point = InputValidator.vector(point, family.d)
    return family.vectors[space] @ point


def project_dataset(family: HashFamily, dataset) -> ProjectedDataset:
    dataset = InputValidator.matrix(dataset, family.d)
    return ProjectedDataset(values=family.project(dataset))


def paa_segments(d: int, K: int) -> np.ndarray:
    """Segment start offsets (length K+1); the last segment absorbs d mod K"""
    d = InputValidator.positive_int(d, "d")
    K = InputValidator.positive_int(K, "K")
    if K > d:
        raise InvalidArgumentError(f"PAA needs K <= d, got K={K}, d={d}")
    width = d // K
    starts = np.arange(K + 1) * width
    starts[K] = d
    return starts


def paa_summarize(point, K: int) -> np.ndarray:
    """Mean of each PAA segment"""
    point = InputValidator.vector(point)
    starts = paa_segments(point.shape[0], K)
    sums = np.add.reduceat(point, starts[:-1])
    return sums / np.diff(starts)


@dataclass(frozen=True)
class PaaProjector:
    """Single-space PAA summaries standing in for hash projections (DET-ONLY)"""
    d: int
    K: int
    L: int = 1

    def __post_init__(self):
        paa_segments(self.d, self.K)

    @property
    def segment_starts(self) -> np.ndarray:
        return paa_segments(self.d, self.K)

    def project(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        starts = self.segment_starts
        sums = np.add.reduceat(points, starts[:-1], axis=1)
        return (sums / np.diff(starts))[np.newaxis, :, :]

    def project_query(self, point: np.ndarray) -> np.ndarray:
        return paa_summarize(point, self.K)[np.newaxis, :]

    def radius_scale(self, epsilon: float) -> float:
        # sqrt(min segment length) * PAA distance lower-bounds the true distance
        return 1.0 / np.sqrt(self.d // self.K)
