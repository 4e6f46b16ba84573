"""
Accuracy metrics
Brute-force ground truth, recall, overall ratio and the ground-truth cache
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist

from src.core.errors import InvalidArgumentError
from src.core.index import dataset_fingerprint
from src.core.input_validator import InputValidator

logger = logging.getLogger(__name__)

GT_CHUNK = 64


class TruthRow(NamedTuple):
    positions: np.ndarray
    distances: np.ndarray


@dataclass(frozen=True)
class GroundTruth:
    """Exact k-NN per query: positions and distances ascending, ties by position"""
    positions: np.ndarray = field(repr=False)
    distances: np.ndarray = field(repr=False)

    @property
    def k(self) -> int:
        return self.positions.shape[1]

    def __len__(self) -> int:
        return self.positions.shape[0]

    def row(self, query_id: int) -> TruthRow:
        return TruthRow(self.positions[query_id], self.distances[query_id])

    def save(self, path: Union[str, Path]) -> None:
        np.savez(path, positions=self.positions, distances=self.distances)

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'GroundTruth':
        with np.load(path) as archive:
            return cls(positions=archive['positions'], distances=archive['distances'])


def _knn_chunk(dataset: np.ndarray, queries: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    distances = cdist(queries.astype(np.float64), dataset.astype(np.float64))
    # stable sort keeps equal distances in position order
    order = np.argsort(distances, axis=1, kind='stable')[:, :k]
    return order.astype(np.int64), np.take_along_axis(distances, order, axis=1)


def brute_force_knn(dataset, queries, k: int, workers: int = 1) -> GroundTruth:
    """Exact Euclidean top-k for every query, computed in query chunks"""
    dataset = InputValidator.matrix(dataset)
    queries = np.atleast_2d(np.asarray(queries))
    queries = InputValidator.matrix(queries, dataset.shape[1], name="queries")
    k = InputValidator.top_k(k, dataset.shape[0])

    chunks = [queries[i:i + GT_CHUNK] for i in range(0, queries.shape[0], GT_CHUNK)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda chunk: _knn_chunk(dataset, chunk, k), chunks))
    else:
        parts = [_knn_chunk(dataset, chunk, k) for chunk in chunks]

    return GroundTruth(positions=np.concatenate([p for p, _ in parts]),
                       distances=np.concatenate([d for _, d in parts]))


def _result_arrays(result) -> Tuple[np.ndarray, np.ndarray]:
    """Accept a QueryResult or a (positions, distances) pair"""
    if hasattr(result, 'positions'):
        return np.asarray(result.positions), np.asarray(result.distances)
    positions, distances = result
    return np.asarray(positions), np.asarray(distances)


def recall(result, truth: TruthRow, k: int) -> float:
    """|R ∩ R*| / k by position"""
    k = InputValidator.positive_int(k, "k")
    positions, _ = _result_arrays(result)
    shared = np.intersect1d(positions[:k], np.asarray(truth.positions)[:k])
    return shared.size / k


def ratio_terms(result_distances: Sequence[float], truth_distances: Sequence[float]) -> Tuple[np.ndarray, int]:
    """
    Rank-wise ratios ||q,o_i|| / ||q,o*_i||.

    A zero truth distance yields 1 when the result distance is also zero;
    otherwise the term is dropped. Returns (kept terms, dropped count).
    """
    got = np.asarray(result_distances, dtype=np.float64)
    best = np.asarray(truth_distances, dtype=np.float64)
    zero = best == 0.0
    terms = np.ones_like(got)
    np.divide(got, best, out=terms, where=~zero)
    dropped = zero & (got != 0.0)
    return terms[~dropped], int(np.count_nonzero(dropped))


def overall_ratio(result, truth: TruthRow, k: int) -> float:
    """Mean of the rank-wise distance ratios over the kept terms; nan if none remain"""
    k = InputValidator.positive_int(k, "k")
    _, distances = _result_arrays(result)
    if distances.shape[0] < k:
        raise InvalidArgumentError(f"overall ratio needs {k} hits, result has {distances.shape[0]}")
    terms, dropped = ratio_terms(distances[:k], np.asarray(truth.distances)[:k])
    if dropped:
        logger.warning(f"overall ratio: excluded {dropped} of {k} terms with zero exact distance")
    if terms.size == 0:
        return math.nan
    return float(terms.mean())


def query_fingerprint(queries) -> int:
    return dataset_fingerprint(np.atleast_2d(np.asarray(queries)))


def gt_cache_path(cache_dir: Union[str, Path], dataset_fp: int, queries_fp: int, k: int) -> Path:
    return Path(cache_dir) / f"gt_{dataset_fp:016x}_{queries_fp:016x}_k{k}.npz"


def cached_ground_truth(dataset, queries, k: int, cache_dir: Optional[Union[str, Path]] = None,
                        workers: int = 1) -> GroundTruth:
    """brute_force_knn behind an .npz sidecar keyed by (dataset, queries, k)"""
    if cache_dir is None:
        return brute_force_knn(dataset, queries, k, workers)

    path = gt_cache_path(cache_dir, dataset_fingerprint(dataset), query_fingerprint(queries), k)
    if path.exists():
        logger.info(f"Ground truth cache hit: {path}")
        return GroundTruth.load(path)

    truth = brute_force_knn(dataset, queries, k, workers)
    path.parent.mkdir(parents=True, exist_ok=True)
    truth.save(path)
    logger.info(f"Ground truth cached to {path}")
    return truth
