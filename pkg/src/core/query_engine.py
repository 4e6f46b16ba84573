"""
DET-LSH query engine
(r,c)-ANN and c^2-k-ANN queries over the L DE-Trees, candidate management
against the beta*n + k budget, and the magic r_min search
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import pdist

from src.core.de_tree import range_query_exact, range_query_optimized
from src.core.errors import InvalidArgumentError
from src.core.index import DetIndex, build_index
from src.core.input_validator import InputValidator
from src.core.params import LshParams

logger = logging.getLogger(__name__)

QUERY_MODES = ("optimized", "exact")
RMIN_MAX_STEPS = 200
RMIN_SAMPLE = 64


@dataclass(frozen=True)
class QueryResult:
    """Top-k hits ascending by exact distance (ties by position)"""
    positions: np.ndarray = field(repr=False)
    distances: np.ndarray = field(repr=False)
    radius_used: float
    candidates_seen: int
    rounds: int = 1

    @property
    def hits(self) -> List[Tuple[int, float]]:
        return list(zip(self.positions.tolist(), self.distances.tolist()))

    def __len__(self) -> int:
        return len(self.positions)


class CandidateSet:
    """Deduplicated candidates of one query with distances memoized on insertion"""

    def __init__(self, dataset: np.ndarray, q: np.ndarray):
        self._dataset = dataset
        self._q = q
        self._seen = np.zeros(dataset.shape[0], dtype=bool)
        self._position_chunks: List[np.ndarray] = []
        self._distance_chunks: List[np.ndarray] = []
        self._cache: Optional[Tuple[np.ndarray, np.ndarray]] = None
        self._size = 0
        self.insertions = 0

    def __len__(self) -> int:
        return self._size

    def __contains__(self, position: int) -> bool:
        return bool(self._seen[position])

    def add(self, positions: np.ndarray) -> int:
        """Insert a batch, computing exact distances for new positions; returns |S|"""
        positions = np.unique(np.asarray(positions, dtype=np.int64))
        fresh = positions[~self._seen[positions]]
        if fresh.size:
            self._seen[fresh] = True
            diff = self._dataset[fresh].astype(np.float64) - self._q
            self._position_chunks.append(fresh)
            self._distance_chunks.append(np.sqrt(np.einsum('ij,ij->i', diff, diff)))
            self._size += fresh.size
            self._cache = None
        self.insertions += 1
        return self._size

    def _arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        if self._cache is None:
            if self._position_chunks:
                self._cache = (np.concatenate(self._position_chunks), np.concatenate(self._distance_chunks))
            else:
                self._cache = (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64))
        return self._cache

    def count_within(self, radius: float) -> int:
        _, distances = self._arrays()
        return int(np.count_nonzero(distances <= radius))

    def top_k(self, k: int) -> Tuple[np.ndarray, np.ndarray]:
        positions, distances = self._arrays()
        order = np.lexsort((positions, distances))[:k]
        return positions[order], distances[order]

    def closest(self) -> Optional[Tuple[int, float]]:
        if not self._size:
            return None
        positions, distances = self.top_k(1)
        return int(positions[0]), float(distances[0])


def _run_round(index: DetIndex, projections: np.ndarray, r: float, candidates: CandidateSet,
               budget: int, mode: str) -> bool:
    """One range query per tree at projected radius scale*r; True once |S| >= budget"""
    radius = index.radius_scale * r
    for i, tree in enumerate(index.trees):
        if mode == "optimized":
            range_query_optimized(tree, projections[i], radius,
                                  sink=lambda positions: candidates.add(positions) >= budget)
        else:
            found = range_query_exact(tree, projections[i], radius, index.projected_lookup(i))
            if found:
                candidates.add(np.fromiter(found, dtype=np.int64, count=len(found)))
        if len(candidates) >= budget:
            return True
    return False


def _check_mode(mode: str) -> str:
    if mode not in QUERY_MODES:
        raise InvalidArgumentError(f"query mode must be one of {QUERY_MODES}, got {mode!r}")
    return mode


def rc_ann(index: DetIndex, q, r: float, c: Optional[float] = None,
           mode: str = "optimized") -> Optional[Tuple[int, float]]:
    """
    (r,c)-ANN: the closest candidate once |S| >= beta*n + 1, or after all L
    trees the closest candidate if it lies within c*r, else None.
    """
    mode = _check_mode(mode)
    r = InputValidator.positive_real(r, "r")
    c = index.params.c if c is None else InputValidator.positive_real(c, "c", strict_lower=1.0)
    q = InputValidator.vector(q, index.d, name="query")
    projections = index.projector.project_query(q)
    budget = index.params.candidate_budget(index.n, 1)

    candidates = CandidateSet(index.dataset, q)
    if _run_round(index, projections, r, candidates, budget, mode):
        return candidates.closest()
    best = candidates.closest()
    if best is not None and best[1] <= c * r:
        return best
    return None


def ck_ann(index: DetIndex, q, k: int, mode: str = "optimized",
           r_min: Optional[float] = None) -> QueryResult:
    """
    c^2-k-ANN: rounds of range queries at r = r_min * c^t until either the
    candidate budget beta*n + k is met or k candidates lie within c*r.
    Candidates persist across rounds.
    """
    mode = _check_mode(mode)
    k = InputValidator.top_k(k, index.n)
    q = InputValidator.vector(q, index.d, name="query")
    r = r_min if r_min is not None else index.params.r_min
    if r is None:
        raise InvalidArgumentError("index has no r_min; pass r_min or rebuild with estimation")
    r = InputValidator.positive_real(r, "r_min")

    c = index.params.c
    projections = index.projector.project_query(q)
    budget = index.params.candidate_budget(index.n, k)
    candidates = CandidateSet(index.dataset, q)

    rounds = 0
    while True:
        rounds += 1
        budget_hit = _run_round(index, projections, r, candidates, budget, mode)
        logger.debug(f"round {rounds}: r={r:.4g} |S|={len(candidates)} budget={budget}")
        if budget_hit or candidates.count_within(c * r) >= k or len(candidates) >= index.n:
            break
        r *= c

    positions, distances = candidates.top_k(k)
    return QueryResult(positions=positions, distances=distances, radius_used=r,
                       candidates_seen=len(candidates), rounds=rounds)


def count_candidates(index: DetIndex, q, r: float) -> int:
    """|S| after a full round at radius r with no budget cut-off"""
    q = InputValidator.vector(q, index.d, name="query")
    projections = index.projector.project_query(q)
    radius = index.radius_scale * r
    seen = np.zeros(index.n, dtype=bool)
    for i, tree in enumerate(index.trees):
        seen[tree.positions_within(projections[i], radius)] = True
    return int(np.count_nonzero(seen))


def initial_radius_guess(index: DetIndex, sample_size: int = RMIN_SAMPLE) -> float:
    """Median pairwise projected distance of a small sample, divided by the radius scale"""
    rng = np.random.default_rng(index.seed)
    picked = rng.choice(index.n, size=min(sample_size, index.n), replace=False)
    projected = index.projector.project(index.dataset[picked])[0]
    distances = pdist(projected) if len(picked) > 1 else np.empty(0)
    median = float(np.median(distances)) if distances.size else 0.0
    if median <= 0.0:
        return 1.0
    return median / index.radius_scale


def estimate_rmin(index: DetIndex, probe_queries: Sequence, k: int,
                  initial_radius: Optional[float] = None) -> float:
    """
    Per probe, the grid radius r (initial * c^t) with |S(r)| >= beta*n + k and
    |S(r/c)| < beta*n + k; the median over probes is returned.
    """
    if len(probe_queries) == 0:
        raise InvalidArgumentError("estimate_rmin needs at least one probe query")
    k = InputValidator.top_k(k, index.n)
    budget = index.params.candidate_budget(index.n, k)
    c = index.params.c
    start = initial_radius_guess(index) if initial_radius is None else \
        InputValidator.positive_real(initial_radius, "initial_radius")

    chosen = []
    for probe in probe_queries:
        r = start
        steps = 0
        if count_candidates(index, probe, r) >= budget:
            while steps < RMIN_MAX_STEPS and count_candidates(index, probe, r / c) >= budget:
                r /= c
                steps += 1
        else:
            while steps < RMIN_MAX_STEPS and count_candidates(index, probe, r) < budget:
                r *= c
                steps += 1
        if steps >= RMIN_MAX_STEPS:
            logger.warning(f"r_min search hit {RMIN_MAX_STEPS} steps; keeping r={r:.4g}")
        chosen.append(r)

    r_min = float(np.median(chosen))
    logger.info(f"Estimated r_min={r_min:.4g} from {len(chosen)} probes (budget {budget})")
    return r_min


def det_only_ck_ann(dataset, q, k: int, params: LshParams, seed: int = 42,
                    mode: str = "optimized") -> QueryResult:
    """Build the single-tree PAA index and answer one c^2-k-ANN query with it"""
    index = build_index(dataset, params, seed=seed, det_only=True)
    return ck_ann(index, q, k, mode=mode)
