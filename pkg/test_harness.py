"""
Tests for the evaluation harness
Vector files, ground truth, accuracy metrics, settings, benchmark runs and the CLI
"""

import json
import logging
import math
import struct
from types import SimpleNamespace

import numpy as np
import pytest

from config.settings import BenchmarkConfig, IndexSettings, RuntimeSettings, SyntheticSpec
from det_lsh_cli import main
from src.core.benchmark import CSV_COLUMNS, run_benchmark
from src.core.datasets import gaussian_mixture, holdout_split, load_matrix
from src.core.errors import InconsistentDimensionError, InvalidArgumentError, TruncatedFileError
from src.core.metrics import (GroundTruth, TruthRow, brute_force_knn, cached_ground_truth,
                              overall_ratio, recall)
from src.core.vector_io import read_vectors, write_vectors


# -- vector files -------------------------------------------------------------

def test_read_fvecs_example(tmp_path):
    path = tmp_path / "one.fvecs"
    path.write_bytes(struct.pack('<iff', 2, 1.0, 2.0))
    vectors = read_vectors(path)
    assert vectors.dtype == np.float32
    assert vectors.tolist() == [[1.0, 2.0]]


def test_read_rejects_mixed_dimensions(tmp_path):
    path = tmp_path / "mixed.fvecs"
    path.write_bytes(struct.pack('<iff', 2, 1.0, 2.0) + struct.pack('<ifff', 3, 1.0, 2.0, 3.0))
    with pytest.raises(InconsistentDimensionError):
        read_vectors(path)


def test_read_rejects_trailing_partial_record(tmp_path):
    path = tmp_path / "cut.fvecs"
    path.write_bytes(struct.pack('<iff', 2, 1.0, 2.0) * 2 + struct.pack('<if', 2, 1.0))
    with pytest.raises(TruncatedFileError):
        read_vectors(path)


@pytest.mark.parametrize("kind,values", [
    ("fvecs", np.random.default_rng(1).normal(size=(7, 5)).astype(np.float32)),
    ("bvecs", np.random.default_rng(2).integers(0, 256, size=(7, 5)).astype(np.uint8)),
    ("ivecs", np.random.default_rng(3).integers(-1000, 1000, size=(7, 5)).astype(np.int32)),
])
def test_vector_files_rewrite_byte_identically(tmp_path, kind, values):
    first, second = tmp_path / f"a.{kind}", tmp_path / f"b.{kind}"
    write_vectors(first, values)
    loaded = read_vectors(first)
    assert np.array_equal(loaded, values)
    write_vectors(second, loaded)
    assert first.read_bytes() == second.read_bytes()
    assert len(first.read_bytes()) == 7 * (4 + 5 * values.dtype.itemsize)


def test_read_limit_and_unknown_suffix(tmp_path):
    path = tmp_path / "many.fvecs"
    write_vectors(path, np.arange(12, dtype=np.float32).reshape(4, 3))
    assert read_vectors(path, limit=2).tolist() == [[0.0, 1.0, 2.0], [3.0, 4.0, 5.0]]
    with pytest.raises(InvalidArgumentError):
        read_vectors(tmp_path / "vectors.txt")


def test_load_matrix_formats(tmp_path):
    data = np.arange(6, dtype=np.uint8).reshape(2, 3)
    write_vectors(tmp_path / "d.bvecs", data)
    np.save(tmp_path / "d.npy", data.astype(np.float64))
    for name in ("d.bvecs", "d.npy"):
        loaded = load_matrix(tmp_path / name)
        assert loaded.dtype == np.float32
        assert loaded.tolist() == data.tolist()
    with pytest.raises(FileNotFoundError):
        load_matrix(tmp_path / "missing.fvecs")


# -- ground truth -------------------------------------------------------------

def test_brute_force_one_dimensional_example():
    truth = brute_force_knn(np.array([[0.0], [1.0], [3.0]]), np.array([[0.9]]), 2)
    assert truth.positions.tolist() == [[1, 0]]
    assert np.allclose(truth.distances, [[0.1, 0.9]])


def test_brute_force_ties_keep_position_order():
    truth = brute_force_knn(np.array([[1.0], [-1.0], [1.0]]), np.array([[0.0]]), 3)
    assert truth.positions.tolist() == [[0, 1, 2]]


def test_brute_force_matches_quadratic_scan(rng):
    data = rng.normal(size=(1000, 8))
    queries = rng.normal(size=(70, 8))
    truth = brute_force_knn(data, queries, 10)
    threaded = brute_force_knn(data, queries, 10, workers=3)
    assert np.array_equal(truth.positions, threaded.positions)
    for i, q in enumerate(queries):
        distances = np.sqrt(((data - q) ** 2).sum(axis=1))
        order = np.argsort(distances, kind='stable')[:10]
        assert truth.positions[i].tolist() == order.tolist()
        assert np.allclose(truth.distances[i], distances[order])


def test_brute_force_with_k_equal_n_and_too_large(rng):
    data = rng.normal(size=(20, 3))
    assert brute_force_knn(data, data[:2], 20).k == 20
    with pytest.raises(InvalidArgumentError):
        brute_force_knn(data, data[:2], 21)


def test_ground_truth_cache(tmp_path, rng):
    data = rng.normal(size=(200, 4)).astype(np.float32)
    queries = rng.normal(size=(5, 4)).astype(np.float32)
    first = cached_ground_truth(data, queries, 3, cache_dir=tmp_path)
    cached = list(tmp_path.glob("gt_*_k3.npz"))
    assert len(cached) == 1
    second = cached_ground_truth(data, queries, 3, cache_dir=tmp_path)
    assert np.array_equal(first.positions, second.positions)
    assert np.array_equal(GroundTruth.load(cached[0]).distances, first.distances)


# -- accuracy metrics ---------------------------------------------------------

def test_recall_cases():
    truth = TruthRow(np.array([1, 2, 3, 4]), np.ones(4))
    assert recall((np.array([4, 3, 2, 1]), np.ones(4)), truth, 4) == 1.0
    assert recall((np.array([5, 6, 7, 8]), np.ones(4)), truth, 4) == 0.0
    assert recall((np.array([1, 2, 7, 8]), np.ones(4)), truth, 4) == 0.5


def test_overall_ratio_cases():
    truth = TruthRow(np.array([0, 1]), np.array([1.0, 2.0]))
    assert overall_ratio((np.array([0, 1]), np.array([1.0, 2.0])), truth, 2) == 1.0
    assert overall_ratio((np.array([5, 6]), np.array([2.0, 4.0])), truth, 2) == 2.0
    with pytest.raises(InvalidArgumentError):
        overall_ratio((np.array([0]), np.array([1.0])), truth, 2)


def test_overall_ratio_zero_distance_terms(caplog):
    exact = TruthRow(np.array([0, 1]), np.array([0.0, 1.0]))
    assert overall_ratio((np.array([0, 1]), np.array([0.0, 2.0])), exact, 2) == 1.5
    with caplog.at_level(logging.WARNING, logger="src.core.metrics"):
        assert overall_ratio((np.array([2, 1]), np.array([1.0, 2.0])), exact, 2) == 2.0
    assert "excluded 1" in caplog.text
    assert math.isnan(overall_ratio((np.array([2]), np.array([1.0])), TruthRow(np.array([0]), np.array([0.0])), 1))


# -- datasets -----------------------------------------------------------------

def test_holdout_split_partitions_rows():
    data = np.arange(400, dtype=np.float64).reshape(100, 4)
    base, queries, held = holdout_split(data, 10, seed=5)
    assert base.shape == (90, 4) and queries.shape == (10, 4)
    assert np.all(np.diff(held) > 0)
    assert np.array_equal(data[held], queries)
    assert sorted(base[:, 0].tolist() + queries[:, 0].tolist()) == data[:, 0].tolist()
    again = holdout_split(data, 10, seed=5)[2]
    assert np.array_equal(held, again)
    with pytest.raises(InvalidArgumentError):
        holdout_split(data, 100)


def test_gaussian_mixture_is_seeded():
    first = gaussian_mixture(50, 6, clusters=3, seed=9)
    assert first.shape == (50, 6) and first.dtype == np.float32
    assert np.array_equal(first, gaussian_mixture(50, 6, clusters=3, seed=9))
    assert not np.array_equal(first, gaussian_mixture(50, 6, clusters=3, seed=10))


# -- settings -----------------------------------------------------------------

def test_index_settings_from_env(monkeypatch):
    monkeypatch.setenv('DETLSH_K', '8')
    monkeypatch.setenv('DETLSH_BETA', '0.2')
    monkeypatch.setenv('DETLSH_REGIONS', '16')
    settings = IndexSettings.from_env()
    assert (settings.K, settings.beta, settings.n_regions, settings.L) == (8, 0.2, 16, 4)
    params = settings.to_params(L=2, leaf_capacity=None)
    assert (params.K, params.L, params.beta, params.leaf_capacity) == (8, 2, 0.2, 128)


def test_runtime_settings_from_env(monkeypatch):
    monkeypatch.setenv('DETLSH_LOG_LEVEL', 'debug')
    monkeypatch.setenv('DETLSH_WORKERS', '4')
    runtime = RuntimeSettings.from_env()
    assert runtime.log_level == 'DEBUG' and runtime.workers == 4


def test_benchmark_config_from_file(tmp_path):
    path = tmp_path / "bench.json"
    path.write_text(json.dumps({"synthetic": {"n": 500, "d": 8}, "k": 5, "methods": ["det-lsh"]}))
    config = BenchmarkConfig.from_file(path)
    assert config.synthetic.n == 500 and config.synthetic.clusters == 10
    assert config.methods == ["det-lsh"]
    with pytest.raises(InvalidArgumentError):
        BenchmarkConfig.from_dict({"k": 5, "neighbours": 3})
    with pytest.raises(FileNotFoundError):
        BenchmarkConfig.from_file(tmp_path / "absent.json")


# -- benchmark ----------------------------------------------------------------

def _small_bench(tmp_path, **changes):
    settings = dict(
        synthetic=SyntheticSpec(n=1500, d=16, clusters=5, seed=3), holdout=20, k=5,
        methods=['det-lsh', 'det-lsh-exact', 'det-only', 'brute-force'],
        params={'K': 8, 'n_regions': 16, 'leaf_capacity': 16},
        beta_sweep=[0.05, 0.2], csv=str(tmp_path / "report.csv"), cache_dir=str(tmp_path / "cache"),
    )
    settings.update(changes)
    return BenchmarkConfig(**settings)


def test_small_benchmark_runs_every_method(tmp_path):
    report = run_benchmark(_small_bench(tmp_path))
    rows = {row.method: row for row in report.rows}
    assert list(rows) == ['det-lsh', 'det-lsh-exact', 'det-only', 'brute-force']
    assert rows['brute-force'].recall == 1.0
    assert rows['brute-force'].ratio == pytest.approx(1.0)
    assert rows['brute-force'].index_bytes == 1480 * 16 * 4
    for method in ('det-lsh', 'det-lsh-exact', 'det-only'):
        assert 0.0 <= rows[method].recall <= 1.0
        assert rows[method].ratio >= 1.0 - 1e-9
        assert rows[method].index_bytes > 0
    assert rows['det-lsh'].params['L'] == 4 and rows['det-only'].params['L'] == 1
    assert [point.beta for point in report.curve] == [0.05, 0.2]

    lines = (tmp_path / "report.csv").read_text().splitlines()
    assert lines[0] == ','.join(CSV_COLUMNS)
    assert len(lines) == 5
    assert 'beta' in report.to_table()


def test_benchmark_accuracy_is_deterministic(tmp_path):
    config = _small_bench(tmp_path, methods=['det-lsh', 'det-only'], beta_sweep=[], csv=None)
    first = run_benchmark(config)
    second = run_benchmark(config)
    for a, b in zip(first.rows, second.rows):
        assert (a.recall, a.ratio, a.index_bytes) == (b.recall, b.ratio, b.index_bytes)


def test_benchmark_rejects_unknown_method(tmp_path):
    with pytest.raises(InvalidArgumentError):
        run_benchmark(_small_bench(tmp_path, methods=['faiss']))


@pytest.mark.slow
def test_recall_on_clustered_hundred_thousand(tmp_path):
    config = BenchmarkConfig(synthetic=SyntheticSpec(n=100_100, d=128, clusters=10, seed=42),
                             holdout=100, k=50, methods=['det-lsh', 'det-only', 'brute-force'],
                             cache_dir=str(tmp_path))
    rows = {row.method: row for row in run_benchmark(config).rows}
    assert rows['det-lsh'].recall >= 0.85
    assert rows['det-lsh'].ratio <= 1.01
    assert rows['det-only'].recall <= rows['det-lsh'].recall + 0.05


# -- command line -------------------------------------------------------------

def test_cli_params(capsys):
    assert main(['params', '--K', '16', '--c', '1.5', '--L', '4']) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1] == 'alpha1=0.7788007831'
    assert [line.split('=')[0] for line in lines[1:]] == ['alpha1', 'alpha2', 'epsilon', 'beta']


def test_cli_build_then_query(tmp_path, capsys):
    data = gaussian_mixture(600, 12, clusters=4, seed=6)
    write_vectors(tmp_path / "data.fvecs", data)
    index_path = tmp_path / "idx.detl"
    assert main(['build', '--dataset', str(tmp_path / "data.fvecs"), '--out', str(index_path),
                 '--K', '6', '--L', '3', '--regions', '16', '--leaf', '16', '--k', '3',
                 '--holdout', '10']) == 0
    assert index_path.exists()
    assert read_vectors(tmp_path / "idx.base.fvecs").shape == (590, 12)
    capsys.readouterr()

    assert main(['query', '--index', str(index_path), '--dataset', str(tmp_path / "idx.base.fvecs"),
                 '--queries', str(tmp_path / "idx.queries.fvecs"), '--k', '3']) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == 'query_id,rank,position,distance'
    rows = [line.split(',') for line in lines[1:]]
    assert len(rows) == 30
    for query_id in range(10):
        mine = [row for row in rows if int(row[0]) == query_id]
        assert [int(row[1]) for row in mine] == [0, 1, 2]
        distances = [float(row[3]) for row in mine]
        assert distances == sorted(distances)


def test_cli_ground_truth(tmp_path):
    data = np.random.default_rng(2).normal(size=(50, 4)).astype(np.float32)
    write_vectors(tmp_path / "base.fvecs", data)
    write_vectors(tmp_path / "q.fvecs", data[:3] + 0.01)
    out = tmp_path / "gt.ivecs"
    assert main(['gt', '--dataset', str(tmp_path / "base.fvecs"), '--queries', str(tmp_path / "q.fvecs"),
                 '--k', '2', '--out', str(out)]) == 0
    assert read_vectors(out)[:, 0].tolist() == [0, 1, 2]


def test_cli_bench(tmp_path, capsys):
    config = tmp_path / "bench.json"
    config.write_text(json.dumps({
        "synthetic": {"n": 800, "d": 8, "clusters": 3, "seed": 1}, "holdout": 10, "k": 3,
        "methods": ["det-lsh", "brute-force"], "params": {"K": 4, "n_regions": 16, "leaf_capacity": 16},
        "cache_dir": str(tmp_path / "cache"),
    }))
    assert main(['bench', '--config', str(config)]) == 0
    assert 'brute-force' in capsys.readouterr().out


def test_cli_failures_exit_with_code_two(tmp_path):
    assert main(['query', '--index', str(tmp_path / "none.detl"), '--dataset', str(tmp_path / "none.fvecs"),
                 '--queries', str(tmp_path / "none.fvecs"), '--k', '3']) == 2
    write_vectors(tmp_path / "d.fvecs", np.ones((20, 4), dtype=np.float32))
    assert main(['build', '--dataset', str(tmp_path / "d.fvecs"), '--out', str(tmp_path / "x.detl"),
                 '--K', '30']) == 2


def test_indexing_scaling_keeps_best_of_repeats(monkeypatch):
    from src.core import benchmark

    seconds = iter([3.0, 1.0, 2.0, 5.0, 2.5, 4.0])
    sizes = []

    def fake_build(data, params, seed):
        sizes.append(data.shape[0])
        return SimpleNamespace(stats=SimpleNamespace(indexing_s=next(seconds)))

    monkeypatch.setattr(benchmark, 'build_index', fake_build)
    timings = benchmark.indexing_scaling(10, d=4, seed=1, repeats=3)
    assert sizes == [10, 10, 10, 20, 20, 20]
    assert (timings['n_s'], timings['2n_s']) == (1.0, 2.5)
    assert timings['ratio'] == 2.5


@pytest.mark.slow
def test_indexing_time_scales_linearly():
    from src.core.benchmark import indexing_scaling

    timings = indexing_scaling(100_000, d=128, seed=3)
    assert 1.6 <= timings['ratio'] <= 2.6
