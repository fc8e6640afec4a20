import io

import numpy as np
import pytest

from ptsbe.errors import CapacityError, NetworkStructureError, PathCacheError
from ptsbe.planner import (
    ContractionPath,
    PathCache,
    cache_lookup_or_plan,
    find_path_greedy,
    find_path_optimal,
    path_cost,
)
from ptsbe.tensor import Index, Tensor, TensorNetwork, execute_path, network_signature

from conftest import all_complete_paths, counted_execute, random_network, replay_cost


def mat(labels, data):
    return Tensor([Index(lb, d) for lb, d in labels], np.asarray(data))


def matrix_chain(shapes):
    """A chain of matrices sharing consecutive bond labels."""
    rng = np.random.default_rng(0)
    ts = []
    for k, (r, c) in enumerate(shapes):
        ts.append(mat([(2 * k, r), (2 * k + 1, c)], rng.standard_normal((r, c))))
    # link bond 2k+1 to 2(k+1): relabel chain inputs
    relabeled = [ts[0]]
    for k in range(1, len(ts)):
        relabeled.append(ts[k].relabeled({2 * k: 2 * k - 1}))
    opens = [0, 2 * len(ts) - 1]
    return TensorNetwork(relabeled, opens)


class TestGreedy:
    def test_single_operand(self):
        net = TensorNetwork([mat([(0, 2)], [1, 0])], [0])
        path = find_path_greedy(net, hypersamples=1)
        assert path.steps == () and path.est_cost == 0.0

    def test_matrix_chain_finds_exhaustive_minimum(self):
        # shapes force contracting the 2x16 . 16x2 pair first
        net = matrix_chain([(2, 2), (2, 16), (16, 2)])
        best = min(
            replay_cost(net, p) for p in all_complete_paths(3)
        )
        path = find_path_greedy(net, hypersamples=100, rng=np.random.default_rng(1))
        assert path.est_cost == pytest.approx(best)

    @pytest.mark.parametrize("seed", range(50))
    def test_more_hypersamples_never_worse(self, seed):
        rng = np.random.default_rng(seed)
        net = random_network(rng, n_ops=6, n_open=2, extra_bonds=2)
        one = find_path_greedy(net, hypersamples=1, rng=np.random.default_rng(seed))
        many = find_path_greedy(net, hypersamples=100, rng=np.random.default_rng(seed))
        assert many.est_cost <= one.est_cost + 1e-9

    def test_deterministic_under_fixed_seed(self):
        rng = np.random.default_rng(9)
        net = random_network(rng, n_ops=7, extra_bonds=2)
        a = find_path_greedy(net, hypersamples=10, rng=np.random.default_rng(3))
        b = find_path_greedy(net, hypersamples=10, rng=np.random.default_rng(3))
        assert a == b

    def test_disconnected_components_handled(self):
        a = mat([(0, 2), (1, 2)], np.eye(2))
        b = mat([(1, 2), (2, 2)], np.eye(2))
        c = mat([(3, 2)], [1.0, 0.0])
        net = TensorNetwork([a, b, c], [0, 2, 3])
        path = find_path_greedy(net, hypersamples=4, rng=np.random.default_rng(0))
        out = execute_path(net, path)
        assert set(out.labels) == {0, 2, 3}

    def test_greedy_paths_execute_correctly(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            net = random_network(rng, n_ops=6, extra_bonds=2)
            path = find_path_greedy(net, hypersamples=8, rng=np.random.default_rng(seed))
            execute_path(net, path)  # raises if structurally wrong


class TestOptimal:
    def test_two_operands(self):
        net = matrix_chain([(2, 3), (3, 2)])
        path = find_path_optimal(net)
        assert path.steps == ((0, 1),)
        assert path.est_cost == 2 * 3 * 2

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_enumeration_up_to_five_operands(self, seed):
        rng = np.random.default_rng(seed)
        n_ops = int(rng.integers(3, 6))
        net = random_network(rng, n_ops=n_ops, n_open=1, extra_bonds=1)
        best = min(replay_cost(net, p) for p in all_complete_paths(n_ops))
        path = find_path_optimal(net)
        assert path.est_cost == pytest.approx(best)
        assert path_cost(net, path) == pytest.approx(best)

    def test_symmetric_chain_all_adjacent_orders_cost_equal(self):
        net = matrix_chain([(2, 2), (2, 2), (2, 2)])
        left_first = path_cost(net, [(0, 1), (0, 1)])
        right_first = path_cost(net, [(1, 2), (0, 1)])
        assert left_first == right_first
        assert find_path_optimal(net).est_cost == left_first

    def test_capacity_error_above_fourteen(self):
        rng = np.random.default_rng(0)
        net = random_network(rng, n_ops=15, n_open=1, dims=(2,), extra_bonds=0)
        with pytest.raises(CapacityError):
            find_path_optimal(net)

    @pytest.mark.parametrize("seed", range(15))
    def test_greedy_within_10x_of_optimal(self, seed):
        rng = np.random.default_rng(100 + seed)
        net = random_network(rng, n_ops=10, n_open=2, extra_bonds=3)
        greedy = find_path_greedy(net, hypersamples=100, rng=np.random.default_rng(seed))
        optimal = find_path_optimal(net)
        ratio = greedy.est_cost / optimal.est_cost
        print(f"greedy/optimal cost ratio (seed {seed}): {ratio:.3f}")
        assert ratio <= 10.0


class TestPathCost:
    def test_single_pair_of_2x2(self):
        net = matrix_chain([(2, 2), (2, 2)])
        assert path_cost(net, [(0, 1)]) == 8.0

    def test_empty_path_costs_zero(self):
        net = TensorNetwork([mat([(0, 2)], [1, 0])], [0])
        assert path_cost(net, []) == 0.0

    def test_invalid_path_rejected(self):
        net = matrix_chain([(2, 2), (2, 2), (2, 2)])
        with pytest.raises(NetworkStructureError):
            path_cost(net, [(0, 7), (0, 1)])

    @pytest.mark.parametrize("seed", range(20))
    def test_agrees_with_instrumented_multiply_count(self, seed):
        rng = np.random.default_rng(seed)
        net = random_network(rng, n_ops=4, n_open=1, extra_bonds=1)
        path = find_path_greedy(net, hypersamples=4, rng=np.random.default_rng(seed))
        _, counted = counted_execute(net, path.steps)
        assert path_cost(net, path) == pytest.approx(counted)


class TestCache:
    def test_miss_then_hit(self):
        net = matrix_chain([(2, 2), (2, 4), (4, 2)])
        cache = PathCache()
        _, hit1 = cache_lookup_or_plan(cache, net, stage=1, hypersamples=4)
        _, hit2 = cache_lookup_or_plan(cache, net, stage=1, hypersamples=4)
        assert (hit1, hit2) == (False, True)
        assert len(cache) == 1

    def test_value_change_still_hits(self):
        net = matrix_chain([(2, 2), (2, 4), (4, 2)])
        cache = PathCache()
        cache_lookup_or_plan(cache, net, stage=1, hypersamples=4)
        scaled = TensorNetwork(
            [Tensor(t.indices, 3.0 * t.data) for t in net.operands], net.open_indices
        )
        _, hit = cache_lookup_or_plan(cache, scaled, stage=1, hypersamples=4)
        assert hit

    def test_different_stage_misses(self):
        net = matrix_chain([(2, 2), (2, 4), (4, 2)])
        cache = PathCache()
        cache_lookup_or_plan(cache, net, stage=1, hypersamples=4)
        _, hit = cache_lookup_or_plan(cache, net, stage=2, hypersamples=4)
        assert not hit
        assert len(cache) == 2

    def test_corrupt_entry_raises(self):
        net = matrix_chain([(2, 2), (2, 4), (4, 2)])
        cache = PathCache()
        sig = network_signature(net)
        cache.put(sig, 1, ContractionPath(steps=((0, 1),), est_cost=1.0))
        with pytest.raises(PathCacheError):
            cache_lookup_or_plan(cache, net, stage=1, hypersamples=4)

    def test_concurrent_duplicate_planning_is_idempotent(self):
        from concurrent.futures import ThreadPoolExecutor

        net = matrix_chain([(2, 2), (2, 4), (4, 2), (2, 2)])
        cache = PathCache()

        def plan(k):
            return cache_lookup_or_plan(cache, net, stage=1, hypersamples=4,
                                        rng=np.random.default_rng(k))

        with ThreadPoolExecutor(max_workers=4) as pool:
            results = list(pool.map(plan, range(8)))
        assert len(cache) == 1
        final = cache.get(network_signature(net), 1)
        for path, _ in results:
            path_cost(net, path)  # every returned path replays
        path_cost(net, final)

    def test_save_load_round_trip(self):
        net = matrix_chain([(2, 2), (2, 4), (4, 2)])
        cache = PathCache()
        path, _ = cache_lookup_or_plan(cache, net, stage=("stage", 2), hypersamples=4)
        buf = io.StringIO()
        cache.save(buf)
        buf.seek(0)
        loaded = PathCache.load(buf)
        got = loaded.get(network_signature(net), ("stage", 2))
        assert got == path


class TestPathSerialization:
    def test_json_round_trip(self):
        path = ContractionPath(steps=((0, 1), (0, 2), (0, 1)), est_cost=123.5)
        assert ContractionPath.from_json(path.to_json()) == path
