"""
Benchmark orchestration
Timed index builds and query loops per method, accuracy against brute force,
CSV / table reports and recall-vs-time curves over beta
"""

import gc
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import wraps
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import psutil
from tqdm import tqdm

from src.core.datasets import gaussian_mixture, holdout_split, load_matrix
from src.core.encoder import row_breakpoints, row_breakpoints_sorted
from src.core.errors import InvalidArgumentError
from src.core.index import DetIndex, build_index
from src.core.input_validator import InputValidator
from src.core.metrics import GroundTruth, brute_force_knn, cached_ground_truth, overall_ratio, recall
from src.core.params import LshParams
from src.core.persistence import index_nbytes
from src.core.query_engine import ck_ann

logger = logging.getLogger(__name__)

METHODS = ('det-lsh', 'det-lsh-exact', 'det-only', 'brute-force')
CSV_COLUMNS = ['method', 'n', 'd', 'k', 'indexing_s', 'query_ms', 'recall', 'ratio', 'index_bytes']


def monitor_performance(func):
    """Log the wall-clock milliseconds of every call, and failures with elapsed time"""
    @wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.perf_counter()
        try:
            result = func(*args, **kwargs)
            duration = (time.perf_counter() - start_time) * 1000
            logger.info(f"{func.__name__}: {duration:.2f}ms")
            return result
        except Exception as e:
            duration = (time.perf_counter() - start_time) * 1000
            logger.error(f"{func.__name__} failed after {duration:.2f}ms: {e}")
            raise
    return wrapper


def measure_memory() -> float:
    """Current resident memory in MB"""
    process = psutil.Process()
    return process.memory_info().rss / 1024 / 1024


@dataclass
class BenchRow:
    method: str
    n: int
    d: int
    k: int
    indexing_s: float
    query_ms: float
    recall: float
    ratio: float
    index_bytes: int
    memory_mb: float = 0.0
    params: Dict[str, object] = field(default_factory=dict)


@dataclass
class CurvePoint:
    beta: float
    query_ms: float
    recall: float
    ratio: float


@dataclass
class BenchReport:
    rows: List[BenchRow] = field(default_factory=list)
    curve: List[CurvePoint] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(row) for row in self.rows], columns=CSV_COLUMNS + ['memory_mb', 'params'])

    def curve_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(point) for point in self.curve], columns=['beta', 'query_ms', 'recall', 'ratio'])

    def to_csv(self, path: Optional[Union[str, Path]] = None) -> str:
        """CSV with the fixed report header; written to path when given"""
        text = self.to_frame()[CSV_COLUMNS].to_csv(index=False, lineterminator='\n')
        if path is not None:
            Path(path).write_text(text)
            logger.info(f"Benchmark CSV written to {path}")
        return text

    def to_table(self) -> str:
        frame = self.to_frame()[CSV_COLUMNS + ['memory_mb']]
        text = frame.to_string(index=False, float_format=lambda v: f"{v:.4f}")
        if self.curve:
            text += "\n\nrecall vs query time (beta sweep)\n"
            text += self.curve_frame().to_string(index=False, float_format=lambda v: f"{v:.4f}")
        return text


QueryFn = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]


def run_queries(query_fn: QueryFn, queries: np.ndarray, workers: int = 1,
                desc: str = "queries") -> Tuple[List[Tuple[np.ndarray, np.ndarray]], float]:
    """Answer every query; returns (results in query order, mean ms per query)"""
    started = time.perf_counter()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(query_fn, queries))
    else:
        results = [query_fn(q) for q in tqdm(queries, desc=desc, leave=False)]
    elapsed = time.perf_counter() - started
    return results, elapsed * 1000.0 / max(len(queries), 1)


def score(results: Sequence[Tuple[np.ndarray, np.ndarray]], truth: GroundTruth, k: int) -> Tuple[float, float]:
    """Mean recall and mean overall ratio over all queries"""
    recalls = [recall(result, truth.row(i), k) for i, result in enumerate(results)]
    ratios = [overall_ratio(result, truth.row(i), k) for i, result in enumerate(results)]
    valid = [r for r in ratios if not math.isnan(r)]
    return float(np.mean(recalls)), float(np.mean(valid)) if valid else math.nan


def _ck_ann_fn(index: DetIndex, k: int, mode: str) -> QueryFn:
    def answer(q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        result = ck_ann(index, q, k, mode=mode)
        return result.positions, result.distances
    return answer


def _brute_force_fn(base: np.ndarray, k: int) -> QueryFn:
    def answer(q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        row = brute_force_knn(base, q, k).row(0)
        return row.positions, row.distances
    return answer


def load_workload(config) -> Tuple[np.ndarray, np.ndarray]:
    """(base, queries) from a config: a file or synthetic data, queries from a file or held out"""
    if config.dataset == 'synthetic':
        spec = config.synthetic
        data = gaussian_mixture(spec.n, spec.d, spec.clusters, spec.spread, spec.seed)
    else:
        data = load_matrix(config.dataset)

    if config.queries:
        queries = load_matrix(config.queries)
        InputValidator.matrix(queries, data.shape[1], name="queries")
        return data, queries
    base, queries, _ = holdout_split(data, config.holdout, config.seed)
    return base, queries


@monitor_performance
def run_benchmark(config) -> BenchReport:
    """Build each configured method, run all queries and score them against brute force"""
    unknown = [m for m in config.methods if m not in METHODS]
    if unknown:
        raise InvalidArgumentError(f"unknown methods {unknown}; choose from {METHODS}")

    base, queries = load_workload(config)
    n, d = base.shape
    k = InputValidator.top_k(config.k, n)
    truth = cached_ground_truth(base, queries, k, config.cache_dir, config.workers)
    params = LshParams.benchmark_profile(**{'k': k, **config.params})

    report = BenchReport()
    indexes: Dict[bool, DetIndex] = {}

    def index_for(det_only: bool) -> DetIndex:
        if det_only not in indexes:
            indexes[det_only] = build_index(base, params, seed=config.seed, det_only=det_only)
        return indexes[det_only]

    for method in config.methods:
        gc.collect()
        memory_before = measure_memory()
        if method == 'brute-force':
            indexing_s, size = 0.0, int(base.nbytes)
            query_fn = _brute_force_fn(base, k)
            echo = {}
        else:
            index = index_for(method == 'det-only')
            indexing_s, size = index.stats.total_s, index_nbytes(index)
            query_fn = _ck_ann_fn(index, k, 'exact' if method == 'det-lsh-exact' else 'optimized')
            echo = {'K': index.params.K, 'L': index.L, 'c': index.params.c,
                    'beta': index.params.beta, 'r_min': index.params.r_min}

        results, query_ms = run_queries(query_fn, queries, config.workers, desc=method)
        mean_recall, mean_ratio = score(results, truth, k)
        row = BenchRow(method=method, n=n, d=d, k=k, indexing_s=indexing_s, query_ms=query_ms,
                       recall=mean_recall, ratio=mean_ratio, index_bytes=size,
                       memory_mb=measure_memory() - memory_before, params=echo)
        report.rows.append(row)
        logger.info(f"{method}: indexing {indexing_s:.2f}s, {query_ms:.2f}ms/query, "
                    f"recall {mean_recall:.4f}, ratio {mean_ratio:.4f}, {size} bytes")

    if config.beta_sweep:
        report.curve = beta_sweep(index_for(False), queries, truth, k, config.beta_sweep, config.workers)

    if config.csv:
        report.to_csv(config.csv)
    return report


def beta_sweep(index: DetIndex, queries: np.ndarray, truth: GroundTruth, k: int,
               betas: Sequence[float], workers: int = 1) -> List[CurvePoint]:
    """Rerun the query loop once per candidate budget beta"""
    points = []
    for beta in betas:
        swept = index.with_params(beta=beta)
        results, query_ms = run_queries(_ck_ann_fn(swept, k, 'optimized'), queries, workers,
                                        desc=f"beta={beta}")
        mean_recall, mean_ratio = score(results, truth, k)
        points.append(CurvePoint(beta=float(beta), query_ms=query_ms, recall=mean_recall, ratio=mean_ratio))
        logger.info(f"beta={beta}: {query_ms:.2f}ms/query, recall {mean_recall:.4f}")
    return points


def simd_sort_available() -> bool:
    """True when this numpy build dispatches float64 np.sort to a vectorized kernel"""
    try:
        from numpy._core._multiarray_umath import __cpu_features__
    except ImportError:
        from numpy.core._multiarray_umath import __cpu_features__
    if __cpu_features__.get('AVX512_SKX', False):
        return True
    major = int(np.__version__.split('.')[0])
    return major >= 2 and any(__cpu_features__.get(flag, False) for flag in ('AVX2', 'ASIMD'))


def compare_breakpoint_selection(n_s: int, n_regions: int = 256, seed: int = 0,
                                 repeats: int = 3) -> Dict[str, Union[float, bool]]:
    """Best-of-repeats seconds for QuickSelect vs full-sort selection on one row sample"""
    sample = np.random.default_rng(seed).standard_normal(n_s)
    timings = {}
    for name, row_fn in (('quickselect', row_breakpoints), ('full_sort', row_breakpoints_sorted)):
        best = math.inf
        for _ in range(repeats):
            work = sample.copy()
            started = time.perf_counter()
            row_fn(work, n_regions)
            best = min(best, time.perf_counter() - started)
        timings[f'{name}_s'] = best
    timings['speedup'] = timings['full_sort_s'] / timings['quickselect_s']
    timings['simd_sort'] = simd_sort_available()
    logger.info(f"Breakpoint selection n_s={n_s}: quickselect {timings['quickselect_s']:.3f}s, "
                f"full sort {timings['full_sort_s']:.3f}s ({timings['speedup']:.2f}x, "
                f"simd sort {timings['simd_sort']})")
    return timings


def indexing_scaling(n: int, d: int = 128, params: Optional[LshParams] = None, seed: int = 42,
                     repeats: int = 3) -> Dict[str, float]:
    """Best-of-repeats indexing seconds (projection through tree build) at n and 2n points"""
    repeats = InputValidator.positive_int(repeats, "repeats")
    params = params or LshParams.benchmark_profile(r_min=1.0)
    if params.r_min is None:
        params = params.with_updates(r_min=1.0)
    data = gaussian_mixture(2 * n, d, seed=seed)
    timings = {}
    for label, size in (('n', n), ('2n', 2 * n)):
        best = math.inf
        for _ in range(repeats):
            gc.collect()
            index = build_index(data[:size], params, seed=seed)
            best = min(best, index.stats.indexing_s)
        timings[f'{label}_s'] = best
    timings['ratio'] = timings['2n_s'] / timings['n_s']
    logger.info(f"Indexing scaling n={n}: {timings['n_s']:.2f}s -> 2n: {timings['2n_s']:.2f}s "
                f"(ratio {timings['ratio']:.2f})")
    return timings
