"""
DET-LSH command line
params / build / gt / query / bench over fvecs, bvecs, ivecs and .npy files
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

# Add parent directory to path for imports
sys.path.append(str(Path(__file__).parent))

from config.settings import BenchmarkConfig, configure_logging, get_index_settings, get_runtime_settings
from src.core.benchmark import run_benchmark
from src.core.datasets import holdout_split, load_matrix
from src.core.errors import DetLshError
from src.core.index import build_index
from src.core.metrics import cached_ground_truth
from src.core.params import derive_params
from src.core.persistence import load_index, save_index
from src.core.query_engine import ck_ann
from src.core.vector_io import write_vectors

logger = logging.getLogger(__name__)


def cmd_params(args) -> int:
    derived = derive_params(args.K, args.c, args.L)
    print(f"K={args.K} L={args.L} c={args.c}")
    print(f"alpha1={derived.alpha1:.10f}")
    print(f"alpha2={derived.alpha2:.10f}")
    print(f"epsilon={derived.epsilon:.10f}")
    print(f"beta={derived.beta:.10f}")
    return 0


def cmd_build(args) -> int:
    settings = get_index_settings()
    params = settings.to_params(K=args.K, L=args.L, c=args.c, beta=args.beta, n_regions=args.regions,
                                leaf_capacity=args.leaf, sample_fraction=args.sample, k=args.k,
                                r_min=args.rmin)
    seed = settings.seed if args.seed is None else args.seed
    data = load_matrix(args.dataset)

    if args.holdout:
        data, queries, _ = holdout_split(data, args.holdout, seed)
        out = Path(args.out)
        write_vectors(out.parent / f"{out.stem}.base.fvecs", data)
        write_vectors(out.parent / f"{out.stem}.queries.fvecs", queries)
        logger.info(f"Hold-out split written next to {out} (.base.fvecs / .queries.fvecs)")

    index = build_index(data, params, seed=seed, det_only=args.det_only)
    save_index(index, args.out)
    return 0


def cmd_gt(args) -> int:
    dataset = load_matrix(args.dataset)
    queries = load_matrix(args.queries)
    runtime = get_runtime_settings()
    truth = cached_ground_truth(dataset, queries, args.k, runtime.cache_dir, runtime.workers)
    if str(args.out).endswith('.ivecs'):
        write_vectors(args.out, truth.positions.astype('int32'), 'ivecs')
    else:
        truth.save(args.out)
    logger.info(f"Ground truth for {len(truth)} queries (k={args.k}) written to {args.out}")
    return 0


def cmd_query(args) -> int:
    dataset = load_matrix(args.dataset)
    queries = load_matrix(args.queries)
    index = load_index(args.index, dataset)
    out = sys.stdout
    out.write("query_id,rank,position,distance\n")
    for query_id, q in enumerate(queries):
        result = ck_ann(index, q, args.k, mode=args.mode, r_min=args.rmin)
        for rank, (position, distance) in enumerate(result.hits):
            out.write(f"{query_id},{rank},{position},{distance:.6f}\n")
    return 0


def cmd_bench(args) -> int:
    config = BenchmarkConfig.from_file(args.config)
    if config.cache_dir is None:
        config.cache_dir = get_runtime_settings().cache_dir
    report = run_benchmark(config)
    print(report.to_table())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='DET-LSH approximate nearest neighbor search')
    parser.add_argument('--log-level', default=None, help='Logging level (default from DETLSH_LOG_LEVEL)')
    parser.add_argument('--log-file', default=None, help='Also log to this file')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('params', help='Print alpha1, alpha2, epsilon and beta for (K, c, L)')
    p.add_argument('--K', type=int, default=16)
    p.add_argument('--c', type=float, default=1.5)
    p.add_argument('--L', type=int, default=4)
    p.set_defaults(handler=cmd_params)

    p = sub.add_parser('build', help='Build an index and save it')
    p.add_argument('--dataset', required=True, help='Dataset file')
    p.add_argument('--out', required=True, help='Index output path')
    p.add_argument('--K', type=int, default=None)
    p.add_argument('--L', type=int, default=None)
    p.add_argument('--c', type=float, default=None)
    p.add_argument('--beta', type=float, default=None, help='Override the derived beta')
    p.add_argument('--regions', type=int, default=None, help='Regions per dimension (N_r)')
    p.add_argument('--leaf', type=int, default=None, help='Leaf capacity')
    p.add_argument('--sample', type=float, default=None, help='Breakpoint sample fraction')
    p.add_argument('--k', type=int, default=None, help='k used for r_min estimation')
    p.add_argument('--rmin', type=float, default=None, help='Skip r_min estimation and use this value')
    p.add_argument('--seed', type=int, default=None)
    p.add_argument('--det-only', action='store_true', help='Single PAA tree instead of L LSH trees')
    p.add_argument('--holdout', type=int, default=0, help='Hold out this many random points as queries')
    p.set_defaults(handler=cmd_build)

    p = sub.add_parser('gt', help='Brute-force ground truth')
    p.add_argument('--dataset', required=True)
    p.add_argument('--queries', required=True)
    p.add_argument('--k', type=int, required=True)
    p.add_argument('--out', required=True, help='.ivecs (positions only) or .npz')
    p.set_defaults(handler=cmd_gt)

    p = sub.add_parser('query', help='Answer c^2-k-ANN queries against a saved index')
    p.add_argument('--index', required=True)
    p.add_argument('--dataset', required=True, help='Dataset the index was built on')
    p.add_argument('--queries', required=True)
    p.add_argument('--k', type=int, required=True)
    p.add_argument('--rmin', type=float, default=None, help='Override the stored r_min')
    p.add_argument('--mode', choices=['optimized', 'exact'], default='optimized')
    p.set_defaults(handler=cmd_query)

    p = sub.add_parser('bench', help='Run a benchmark described by a JSON config')
    p.add_argument('--config', required=True)
    p.set_defaults(handler=cmd_bench)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    runtime = get_runtime_settings()
    configure_logging(args.log_level or runtime.log_level, args.log_file or runtime.log_file)
    try:
        return args.handler(args)
    except (DetLshError, FileNotFoundError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 2


if __name__ == '__main__':
    sys.exit(main())
