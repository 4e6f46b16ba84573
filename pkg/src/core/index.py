"""
DET-LSH index assembly
Projection -> breakpoint selection -> encoding -> L DE-Trees -> r_min estimation
"""

import hashlib
import logging
import time
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from src.core.de_tree import DeTree, build_tree
from src.core.encoder import BreakpointTable, encode_dataset, select_breakpoints
from src.core.errors import InvalidArgumentError
from src.core.input_validator import InputValidator
from src.core.params import LshParams
from src.core.projection import PaaProjector, ProjectedDataset, Projector, sample_hash_family

logger = logging.getLogger(__name__)

RMIN_PROBES = 10


def dataset_fingerprint(dataset: np.ndarray) -> int:
    """64-bit content hash over the shape and float32 little-endian rows"""
    data = np.ascontiguousarray(dataset, dtype='<f4')
    digest = hashlib.blake2b(digest_size=8)
    digest.update(np.asarray(data.shape, dtype='<u8').tobytes())
    digest.update(data.tobytes())
    return int.from_bytes(digest.digest(), 'little')


@dataclass
class BuildStats:
    """Wall-clock seconds per build phase"""
    projection_s: float = 0.0
    breakpoints_s: float = 0.0
    encoding_s: float = 0.0
    trees_s: float = 0.0
    rmin_s: float = 0.0

    @property
    def total_s(self) -> float:
        return self.projection_s + self.breakpoints_s + self.encoding_s + self.trees_s + self.rmin_s

    @property
    def indexing_s(self) -> float:
        """Encoding and indexing phases only"""
        return self.projection_s + self.breakpoints_s + self.encoding_s + self.trees_s


@dataclass(frozen=True)
class DetIndex:
    """Assembled index; immutable once built"""
    params: LshParams
    projector: Projector
    table: BreakpointTable
    trees: List[DeTree] = field(repr=False)
    dataset: np.ndarray = field(repr=False)
    fingerprint: int
    seed: int
    stats: BuildStats = field(default_factory=BuildStats, compare=False)

    def __post_init__(self):
        if len(self.trees) != self.projector.L:
            raise InvalidArgumentError(f"index holds {len(self.trees)} trees for L={self.projector.L}")
        n = self.dataset.shape[0]
        for tree in self.trees:
            if tree.n != n or tree.K != self.params.K or tree.n_regions != self.params.n_regions:
                raise InvalidArgumentError("tree disagrees with index on (n, K, N_r)")

    @property
    def n(self) -> int:
        return self.dataset.shape[0]

    @property
    def d(self) -> int:
        return self.dataset.shape[1]

    @property
    def L(self) -> int:
        return len(self.trees)

    @property
    def det_only(self) -> bool:
        return isinstance(self.projector, PaaProjector)

    @property
    def radius_scale(self) -> float:
        """Projected radius per unit of original radius (epsilon for LSH)"""
        return self.projector.radius_scale(self.params.epsilon)

    def with_params(self, **changes) -> 'DetIndex':
        return replace(self, params=self.params.with_updates(**changes))

    def project_query(self, q) -> np.ndarray:
        q = InputValidator.vector(q, self.d, name="query")
        return self.projector.project_query(q)

    def projected_lookup(self, space: int):
        """Recompute H_i(o) for a batch of positions from the original points"""
        def lookup(positions: np.ndarray) -> np.ndarray:
            return self.projector.project(self.dataset[positions])[space]
        return lookup


def build_index(dataset, params: LshParams, seed: int = 42, det_only: bool = False,
                rmin_probes: int = RMIN_PROBES) -> DetIndex:
    """
    Build a DET-LSH index (or the single-tree PAA variant when det_only).

    When params.r_min is None the magic r_min is estimated with rmin_probes
    sampled data points and written back into the index params.
    """
    dataset = InputValidator.matrix(dataset)
    n, d = dataset.shape
    stats = BuildStats()
    rng = np.random.default_rng(seed)
    family_seed, sample_seed, probe_seed = (int(s) for s in rng.integers(0, 2**63 - 1, size=3))

    started = time.perf_counter()
    if det_only:
        if params.L != 1:
            params = params.with_updates(L=1)
        projector = PaaProjector(d=d, K=params.K)
    else:
        projector = sample_hash_family(d, params.K, params.L, family_seed)
    projected = ProjectedDataset(values=projector.project(dataset))
    stats.projection_s = time.perf_counter() - started

    started = time.perf_counter()
    table = select_breakpoints(projected, params.n_regions, params.sample_fraction, sample_seed)
    stats.breakpoints_s = time.perf_counter() - started

    started = time.perf_counter()
    encoded = encode_dataset(projected, table)
    stats.encoding_s = time.perf_counter() - started
    del projected

    started = time.perf_counter()
    trees = [
        build_tree(encoded.symbols[i], params.K, params.leaf_capacity, params.n_regions,
                   rows=table.rows(i), space_index=i)
        for i in range(projector.L)
    ]
    stats.trees_s = time.perf_counter() - started

    index = DetIndex(params=params, projector=projector, table=table, trees=trees,
                     dataset=dataset, fingerprint=dataset_fingerprint(dataset),
                     seed=int(seed), stats=stats)

    if params.r_min is None:
        from src.core.query_engine import estimate_rmin

        started = time.perf_counter()
        probe_rows = np.random.default_rng(probe_seed).choice(n, size=min(rmin_probes, n), replace=False)
        r_min = estimate_rmin(index, [dataset[p] for p in probe_rows], min(params.k, n))
        stats.rmin_s = time.perf_counter() - started
        index = index.with_params(r_min=r_min)

    variant = "DET-ONLY" if det_only else "DET-LSH"
    logger.info(
        f"{variant} index built: n={n} d={d} K={params.K} L={projector.L} "
        f"leaves={sum(t.leaf_count for t in trees)} r_min={index.params.r_min:.4g} "
        f"({stats.total_s:.2f}s: projection {stats.projection_s:.2f}s, breakpoints {stats.breakpoints_s:.2f}s, "
        f"encoding {stats.encoding_s:.2f}s, trees {stats.trees_s:.2f}s, r_min {stats.rmin_s:.2f}s)"
    )
    return index
