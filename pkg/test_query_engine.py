"""
Tests for (r,c)-ANN and c^2-k-ANN queries, r_min estimation and DET-ONLY
"""

import numpy as np
import pytest

from src.core.datasets import gaussian_mixture
from src.core.errors import InvalidArgumentError
from src.core.index import build_index
from src.core.metrics import brute_force_knn
from src.core.params import LshParams
from src.core.query_engine import (CandidateSet, ck_ann, count_candidates, det_only_ck_ann,
                                   estimate_rmin, rc_ann)


@pytest.fixture(scope="module")
def hundred_points():
    return np.random.default_rng(21).normal(size=(100, 16)).astype(np.float32)


@pytest.fixture(scope="module")
def hundred_params():
    return LshParams.create(K=4, L=2, c=1.5, beta=0.1, n_regions=8, leaf_capacity=8, k=5)


def _exact_order(data, q):
    distances = np.linalg.norm(data.astype(np.float64) - q, axis=1)
    order = np.lexsort((np.arange(len(data)), distances))
    return order, distances[order]


# -- candidate set ------------------------------------------------------------

def test_candidate_set_deduplicates_and_memoizes(small_data):
    q = small_data[0].astype(np.float64) + 0.5
    candidates = CandidateSet(small_data, q)
    assert candidates.add(np.array([3, 1, 3])) == 2
    assert candidates.add(np.array([1, 7])) == 3
    assert 7 in candidates and 2 not in candidates
    positions, distances = candidates.top_k(3)
    assert sorted(positions.tolist()) == [1, 3, 7]
    assert np.allclose(distances, np.linalg.norm(small_data[positions].astype(np.float64) - q, axis=1))
    assert np.all(np.diff(distances) >= 0)
    assert candidates.insertions == 2


def test_candidate_set_breaks_ties_by_position():
    data = np.array([[1.0], [0.0], [1.0], [-1.0]])
    candidates = CandidateSet(data, np.array([0.0]))
    candidates.add(np.array([3, 2, 0, 1]))
    positions, distances = candidates.top_k(4)
    assert positions.tolist() == [1, 0, 2, 3]
    assert candidates.count_within(1.0) == 4
    assert candidates.count_within(0.5) == 1


# -- (r,c)-ANN ----------------------------------------------------------------

def test_rc_ann_finds_planted_exact_match(small_index, small_data):
    for z in (0, 17, 1999):
        position, distance = rc_ann(small_index, small_data[z], r=0.5)
        assert position == z and distance == 0.0


def test_rc_ann_returns_nothing_far_from_data():
    data = np.random.default_rng(4).normal(size=(300, 8))
    params = LshParams.create(K=4, L=4, c=1.5, beta=0.2, n_regions=16, leaf_capacity=8, r_min=1.0)
    index = build_index(data, params, seed=2)
    q = np.full(8, 1000.0)
    assert count_candidates(index, q, 1e-6) < params.candidate_budget(index.n, 1)
    assert rc_ann(index, q, r=1e-6) is None


def test_rc_ann_planted_success_frequency(small_index, small_data):
    rng = np.random.default_rng(8)
    r, c = 4.0, small_index.params.c
    successes = 0
    for z in rng.choice(small_index.n, 200, replace=False):
        direction = rng.normal(size=small_index.d)
        q = small_data[z] + 0.5 * r * direction / np.linalg.norm(direction)
        hit = rc_ann(small_index, q, r)
        successes += hit is not None and hit[1] <= c * r
    assert successes / 200 >= 0.5 - 1 / np.e


def test_rc_ann_validates_arguments(small_index):
    with pytest.raises(InvalidArgumentError):
        rc_ann(small_index, np.zeros(5), r=1.0)
    with pytest.raises(InvalidArgumentError):
        rc_ann(small_index, np.zeros(32), r=0.0)
    with pytest.raises(InvalidArgumentError):
        rc_ann(small_index, np.zeros(32), r=1.0, c=1.0)


# -- c^2-k-ANN ----------------------------------------------------------------

def test_ck_ann_with_k_equal_n_returns_everything_sorted(hundred_points, hundred_params):
    index = build_index(hundred_points, hundred_params, seed=1)
    q = np.random.default_rng(3).normal(size=16)
    result = ck_ann(index, q, k=100)
    order, distances = _exact_order(hundred_points, q)
    assert result.positions.tolist() == order.tolist()
    assert np.allclose(result.distances, distances, rtol=1e-9)
    assert result.candidates_seen == 100


def test_ck_ann_head_is_planted_point(small_index, small_data):
    result = ck_ann(small_index, small_data[42], k=1)
    assert result.hits == [(42, 0.0)]


@pytest.mark.parametrize("mode", ["optimized", "exact"])
def test_ck_ann_results_are_sorted_distinct_and_exact(small_index, small_data, mode):
    rng = np.random.default_rng(5)
    for z in rng.choice(small_index.n, 10, replace=False):
        q = small_data[z] + rng.normal(scale=0.5, size=small_index.d)
        result = ck_ann(small_index, q, k=10, mode=mode)
        assert len(result) == 10
        assert len(set(result.positions.tolist())) == 10
        assert np.all(np.diff(result.distances) >= 0)
        recomputed = np.linalg.norm(small_data[result.positions].astype(np.float64) - q, axis=1)
        assert np.allclose(result.distances, recomputed, rtol=1e-5)


def test_ck_ann_radius_follows_geometric_schedule(small_index, small_data):
    rng = np.random.default_rng(6)
    r_min, c = small_index.params.r_min, small_index.params.c
    for z in rng.choice(small_index.n, 10, replace=False):
        result = ck_ann(small_index, small_data[z] + rng.normal(size=small_index.d), k=10)
        assert result.radius_used == pytest.approx(r_min * c ** (result.rounds - 1))


def test_ck_ann_stops_within_first_round_once_budget_is_met(small_index, small_data):
    budget = small_index.params.candidate_budget(small_index.n, 10)
    largest_leaf = max(len(leaf) for tree in small_index.trees for leaf in tree.leaves())
    result = ck_ann(small_index, small_data[3], k=10, r_min=1e6)
    assert result.rounds == 1
    assert budget <= result.candidates_seen < budget + largest_leaf


def test_ck_ann_meets_c2_contract(small_index, small_data):
    rng = np.random.default_rng(11)
    picked = rng.choice(small_index.n, 100, replace=False)
    queries = small_data[picked] + rng.normal(scale=1.0, size=(100, small_index.d))
    truth = brute_force_knn(small_data, queries, 10)
    c_sq = small_index.params.c ** 2
    satisfied = 0
    for i, q in enumerate(queries):
        result = ck_ann(small_index, q, k=10)
        satisfied += bool(np.all(result.distances <= c_sq * truth.distances[i] + 1e-9))
    assert satisfied / 100 >= 0.80


def test_ck_ann_validates_arguments(small_index):
    with pytest.raises(InvalidArgumentError):
        ck_ann(small_index, np.zeros(32), k=small_index.n + 1)
    with pytest.raises(InvalidArgumentError):
        ck_ann(small_index, np.zeros(32), k=0)
    with pytest.raises(InvalidArgumentError):
        ck_ann(small_index, np.zeros(31), k=5)
    with pytest.raises(InvalidArgumentError):
        ck_ann(small_index, np.zeros(32), k=5, mode="fast")


# -- r_min --------------------------------------------------------------------

def test_estimate_rmin_definition_instance(small_index, small_data):
    probe, k, c = small_data[17], 10, small_index.params.c
    r0 = 0.1
    while count_candidates(small_index, probe, r0) <= k + 1 or \
            count_candidates(small_index, probe, r0 / c) >= count_candidates(small_index, probe, r0):
        r0 *= c
    beta = (count_candidates(small_index, probe, r0) - k) / small_index.n
    tuned = small_index.with_params(beta=beta)
    assert estimate_rmin(tuned, [probe], k, initial_radius=r0) == r0


def test_estimate_rmin_brackets_the_budget(small_index, small_data):
    k, c = 10, small_index.params.c
    budget = small_index.params.candidate_budget(small_index.n, k)
    for z in (5, 500, 1500):
        r = estimate_rmin(small_index, [small_data[z]], k)
        assert count_candidates(small_index, small_data[z], r) >= budget
        assert count_candidates(small_index, small_data[z], r / c) < budget


def test_estimate_rmin_duplicate_probes_match_single(small_index, small_data):
    single = estimate_rmin(small_index, [small_data[9]], 10)
    assert estimate_rmin(small_index, [small_data[9]] * 3, 10) == single


def test_estimate_rmin_needs_probes(small_index):
    with pytest.raises(InvalidArgumentError):
        estimate_rmin(small_index, [], 10)


def test_build_index_estimates_rmin(small_index):
    assert small_index.params.r_min > 0
    assert small_index.stats.rmin_s > 0
    assert small_index.stats.total_s >= small_index.stats.indexing_s


# -- DET-ONLY -----------------------------------------------------------------

def test_det_only_uses_single_tree(hundred_points, hundred_params):
    index = build_index(hundred_points, hundred_params, seed=1, det_only=True)
    assert index.det_only and index.L == 1 and len(index.trees) == 1
    assert index.params.L == 1


def test_det_only_k_equal_n_returns_everything_sorted(hundred_points, hundred_params):
    q = np.random.default_rng(13).normal(size=16)
    result = det_only_ck_ann(hundred_points, q, 100, hundred_params, seed=1)
    order, distances = _exact_order(hundred_points, q)
    assert result.positions.tolist() == order.tolist()
    assert np.allclose(result.distances, distances, rtol=1e-9)


@pytest.mark.slow
def test_ck_ann_c2_contract_on_ten_thousand_points():
    data = gaussian_mixture(10_000, 64, clusters=20, spread=2.0, seed=17)
    rng = np.random.default_rng(18)
    queries = data[rng.choice(10_000, 100, replace=False)] + rng.normal(scale=1.0, size=(100, 64))
    index = build_index(data, LshParams.benchmark_profile(k=10), seed=19)
    truth = brute_force_knn(data, queries, 10)
    c_sq = index.params.c ** 2
    satisfied = sum(
        bool(np.all(ck_ann(index, q, 10).distances <= c_sq * truth.distances[i] + 1e-9))
        for i, q in enumerate(queries)
    )
    assert satisfied / 100 >= 0.80
