"""
Performance Benchmarking Suite for DET-LSH
Breakpoint selection speedup, indexing scalability and query throughput
"""

import gc
import json
import logging
import statistics
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

# Add parent directory to path for imports
sys.path.append(str(Path(__file__).parent))

from config.settings import configure_logging
from src.core.benchmark import compare_breakpoint_selection, indexing_scaling, measure_memory
from src.core.datasets import gaussian_mixture, holdout_split
from src.core.index import build_index
from src.core.params import LshParams
from src.core.query_engine import ck_ann

logger = logging.getLogger(__name__)


@dataclass
class BenchmarkResult:
    test_name: str
    duration_ms: float
    memory_mb: float
    success: bool
    details: Optional[Dict[str, float]] = None
    error: Optional[str] = None


class PerformanceBenchmark:
    """Speed and scaling measurements for the index build and query paths"""

    def __init__(self, n: int = 100_000, d: int = 128, seed: int = 42):
        self.n = n
        self.d = d
        self.seed = seed
        self.results: List[BenchmarkResult] = []

    def run_test(self, test_name: str, func, *args, **kwargs) -> Optional[Dict[str, float]]:
        """Run one measurement, recording time, memory delta and failure"""
        gc.collect()
        start_memory = measure_memory()
        start_time = time.perf_counter()
        try:
            details = func(*args, **kwargs)
            success, error = True, None
        except Exception as e:
            details, success, error = None, False, str(e)
            logger.error(f"{test_name} failed: {e}")

        duration_ms = (time.perf_counter() - start_time) * 1000
        memory_mb = measure_memory() - start_memory
        self.results.append(BenchmarkResult(test_name=test_name, duration_ms=duration_ms,
                                            memory_mb=memory_mb, success=success,
                                            details=details, error=error))
        logger.info(f"{test_name}: {duration_ms:.2f}ms, {memory_mb:.2f}MB, Success: {success}")
        return details

    def test_breakpoint_selection(self, n_s: int = 1_000_000) -> Dict[str, float]:
        return compare_breakpoint_selection(n_s, n_regions=256, seed=self.seed)

    def test_indexing_scaling(self) -> Dict[str, float]:
        return indexing_scaling(self.n, self.d, seed=self.seed)

    def test_query_throughput(self, queries: int = 100, k: int = 50) -> Dict[str, float]:
        data = gaussian_mixture(self.n, self.d, seed=self.seed)
        base, held, _ = holdout_split(data, queries, self.seed)
        index = build_index(base, LshParams.benchmark_profile(k=k), seed=self.seed)
        latencies = []
        for q in held:
            started = time.perf_counter()
            ck_ann(index, q, k)
            latencies.append((time.perf_counter() - started) * 1000)
        return {
            'mean_ms': statistics.mean(latencies),
            'median_ms': statistics.median(latencies),
            'p95_ms': float(np.percentile(latencies, 95)),
            'qps': 1000.0 / statistics.mean(latencies),
        }

    def run_all_benchmarks(self, report_path: str = 'benchmark_detailed_report.json') -> Dict:
        self.run_test("Breakpoint Selection - QuickSelect vs Full Sort", self.test_breakpoint_selection)
        self.run_test("Indexing Scalability - n vs 2n", self.test_indexing_scaling)
        self.run_test("Query Throughput - c^2-k-ANN", self.test_query_throughput)

        report = self.generate_report()
        with open(report_path, 'w') as f:
            json.dump(report, f, indent=2)
        logger.info(f"Detailed benchmark report saved to {report_path}")
        return report

    def generate_report(self) -> Dict:
        durations = [r.duration_ms for r in self.results if r.success]
        return {
            'dataset': {'n': self.n, 'd': self.d, 'seed': self.seed},
            'summary': {
                'tests_run': len(self.results),
                'tests_passed': sum(r.success for r in self.results),
                'total_ms': sum(durations),
            },
            'results': [asdict(r) for r in self.results],
        }


if __name__ == "__main__":
    import argparse

    parser = argparse.ArgumentParser(description='DET-LSH performance benchmarks')
    parser.add_argument('--n', type=int, default=100_000, help='Points for scaling and throughput runs')
    parser.add_argument('--d', type=int, default=128)
    parser.add_argument('--seed', type=int, default=42)
    parser.add_argument('--report', default='benchmark_detailed_report.json')
    args = parser.parse_args()

    configure_logging('INFO', 'benchmark_results.log')
    benchmark = PerformanceBenchmark(n=args.n, d=args.d, seed=args.seed)
    report = benchmark.run_all_benchmarks(args.report)

    for result in benchmark.results:
        print(f"{result.test_name}: {result.duration_ms:.0f}ms")
        for name, value in (result.details or {}).items():
            print(f"  {name}: {value:.4f}")
