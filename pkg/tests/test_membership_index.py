import numpy as np
import pytest
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from exceptions import ConfigError, DatasetError
from hypergraph import Hypergraph
from membership_index import MembershipIndex, build_index, node_hops, sample_pairs


def _clique_distances(h):
    """All-pairs hops on the materialised clique expansion"""
    H = h.dense_incidence()
    adjacency = (H @ H.T > 0).astype(float)
    np.fill_diagonal(adjacency, 0.0)
    return shortest_path(csr_matrix(adjacency), unweighted=True, directed=False)


def _oracle_sets(h, K):
    """M_k(v) straight from the definition: k = max hop from v to any member"""
    dist = _clique_distances(h)
    sets = [[[] for _ in range(K + 1)] for _ in range(h.num_nodes)]
    for v in range(h.num_nodes):
        for j, members in enumerate(h.edge_nodes):
            hop = dist[v, members].max()
            if np.isfinite(hop) and 1 <= hop <= K + 1:
                sets[v][int(hop) - 1].append(j)
    return sets


def _chain():
    return Hypergraph(6, [[0, 1], [1, 2], [2, 3], [3, 4, 5]], np.zeros((6, 1)))


class TestNodeHops:

    def test_chain_distances(self):
        assert node_hops(_chain(), 0, 4) == {0: 0, 1: 1, 2: 2, 3: 3, 4: 4, 5: 4}

    def test_depth_limit_truncates(self):
        assert node_hops(_chain(), 0, 2) == {0: 0, 1: 1, 2: 2}

    def test_isolated_node(self):
        h = Hypergraph(3, [[0, 1]], np.zeros((3, 1)))
        assert node_hops(h, 2, 3) == {2: 0}

    def test_single_large_hyperedge(self):
        h = Hypergraph(5, [[0, 1, 2, 3, 4]], np.zeros((5, 1)))
        assert node_hops(h, 2, 1) == {0: 1, 1: 1, 2: 0, 3: 1, 4: 1}

    def test_invalid_anchor(self):
        with pytest.raises(DatasetError):
            node_hops(_chain(), 6, 1)


class TestBuildIndex:

    def test_hand_built_example(self):
        h = Hypergraph(6, [[0, 1], [1, 2], [3, 4, 5], [2, 3]], np.zeros((6, 1)))
        index = build_index(h, 3)
        assert index.describe(0) == {"1": [0], "2": [1], "3": [3], "4": [2]}

    def test_singleton_hyperedge_excluded(self):
        h = Hypergraph(3, [[0], [0, 1], [1, 2]], np.zeros((3, 1)))
        index = build_index(h, 1)
        assert 0 not in index.members(0, 1).tolist()
        assert 0 not in index.members(0, 2).tolist()
        assert index.members(0, 1).tolist() == [1]

    def test_incident_hyperedges_are_one_hop(self, toy_hypergraph):
        index = build_index(toy_hypergraph, 2)
        for v, edges in enumerate(toy_hypergraph.node_edges):
            for j in edges:
                assert j in index.members(v, 1)

    def test_out_of_range_hop_is_empty(self, toy_hypergraph):
        index = build_index(toy_hypergraph, 1)
        assert index.members(0, 3).size == 0
        assert index.members(0, 0).size == 0

    def test_sets_are_disjoint_and_sorted(self, toy_hypergraph):
        index = build_index(toy_hypergraph, 3)
        for v in range(toy_hypergraph.num_nodes):
            seen = []
            for k in range(1, 5):
                members = index.members(v, k).tolist()
                assert members == sorted(members)
                seen.extend(members)
            assert len(seen) == len(set(seen))

    def test_matches_all_pairs_oracle(self, hypergraph_factory):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            num_nodes = int(rng.integers(2, 31))
            num_edges = int(rng.integers(1, 21))
            K = int(rng.integers(1, 5))
            h = hypergraph_factory(rng, num_nodes, num_edges, num_features=1, max_size=5)
            index = build_index(h, K)
            oracle = _oracle_sets(h, K)
            for v in range(num_nodes):
                for k in range(1, K + 2):
                    assert index.members(v, k).tolist() == oracle[v][k - 1], (v, k, K)

    def test_set_sizes(self):
        index = build_index(_chain(), 1)
        np.testing.assert_array_equal(index.set_sizes()[0], [1, 1])


class TestSamplePairs:

    def test_undersized_pools_returned_whole(self):
        index = MembershipIndex(1, [[np.array([1, 4, 7]), np.array([2])]])
        sample = sample_pairs(index, 0, 1, 10, np.random.default_rng(0))
        np.testing.assert_array_equal(sample.positives, [1, 4, 7])
        np.testing.assert_array_equal(sample.negatives, [2])
        assert not sample.skip

    def test_empty_negative_pool_skips(self):
        index = MembershipIndex(1, [[np.array([1]), np.zeros(0, dtype=np.int64)]])
        assert sample_pairs(index, 0, 1, 3, np.random.default_rng(0)).skip

    def test_empty_positive_pool_skips(self):
        index = MembershipIndex(1, [[np.zeros(0, dtype=np.int64), np.array([5])]])
        assert sample_pairs(index, 0, 1, 3, np.random.default_rng(0)).skip

    def test_uniform_inclusion(self):
        index = MembershipIndex(1, [[np.arange(100), np.arange(100, 110)]])
        rng = np.random.default_rng(99)
        counts = np.zeros(100)
        trials = 10000
        for _ in range(trials):
            sample = sample_pairs(index, 0, 1, 10, rng)
            assert np.unique(sample.positives).size == 10
            counts[sample.positives] += 1
        sigma = np.sqrt(trials * 0.1 * 0.9)
        assert np.abs(counts - trials * 0.1).max() < 5 * sigma

    def test_hop_outside_range(self):
        index = MembershipIndex(1, [[np.array([1]), np.array([2])]])
        with pytest.raises(ConfigError):
            sample_pairs(index, 0, 2, 3, np.random.default_rng(0))

    def test_zero_samples(self):
        index = MembershipIndex(1, [[np.array([1]), np.array([2])]])
        with pytest.raises(ConfigError):
            sample_pairs(index, 0, 1, 0, np.random.default_rng(0))

    def test_full_pass_within_budget(self, hypergraph_factory):
        rng = np.random.default_rng(5)
        h = hypergraph_factory(rng, 25, 15, max_size=4)
        K, d = 2, 2
        index = build_index(h, K)
        total = 0
        for v in range(h.num_nodes):
            for k in range(1, K + 1):
                sample = sample_pairs(index, v, k, d, rng)
                if not sample.skip:
                    total += sample.positives.size + sample.negatives.size
        assert total <= h.num_nodes * K * 2 * d
