import numpy as np
import pytest

from exceptions import DatasetError
from hypergraph import Hypergraph, compute_degrees, propagation_operators, safe_inverse


class TestConstruction:

    def test_adjacency_lists_agree(self, toy_hypergraph):
        h = toy_hypergraph
        for j, members in enumerate(h.edge_nodes):
            for v in members:
                assert j in h.node_edges[v]
        for v, edges in enumerate(h.node_edges):
            for j in edges:
                assert v in h.edge_nodes[j]

    def test_incidence_matches_lists(self, toy_hypergraph):
        dense = toy_hypergraph.dense_incidence()
        assert dense.shape == (6, 4)
        for j, members in enumerate(toy_hypergraph.edge_nodes):
            np.testing.assert_array_equal(np.flatnonzero(dense[:, j]), members)
        assert toy_hypergraph.num_memberships == 10

    def test_default_weights_are_ones(self, toy_hypergraph):
        np.testing.assert_array_equal(toy_hypergraph.weights, np.ones(4))

    def test_arrays_are_read_only(self, toy_hypergraph):
        with pytest.raises(ValueError):
            toy_hypergraph.features[0, 0] = 1.0

    def test_num_classes_inferred(self, toy_hypergraph):
        assert toy_hypergraph.num_classes == 2

    def test_isolated_node_allowed(self):
        h = Hypergraph(3, [[0, 1]], np.zeros((3, 2)))
        assert h.node_edges[2].size == 0


class TestValidation:

    def test_out_of_range_node(self):
        with pytest.raises(DatasetError, match="outside"):
            Hypergraph(3, [[0, 3]], np.zeros((3, 1)))

    def test_empty_hyperedge(self):
        with pytest.raises(DatasetError, match="empty"):
            Hypergraph(3, [[0], []], np.zeros((3, 1)))

    def test_repeated_member(self):
        with pytest.raises(DatasetError, match="more than once"):
            Hypergraph(3, [[0, 0, 1]], np.zeros((3, 1)))

    def test_non_positive_weight(self):
        with pytest.raises(DatasetError, match="positive"):
            Hypergraph(3, [[0, 1], [1, 2]], np.zeros((3, 1)), weights=[1.0, 0.0])

    def test_feature_row_mismatch(self):
        with pytest.raises(DatasetError, match="rows"):
            Hypergraph(3, [[0, 1]], np.zeros((2, 4)))

    def test_label_count_mismatch(self):
        with pytest.raises(DatasetError, match="labels"):
            Hypergraph(3, [[0, 1]], np.zeros((3, 1)), labels=[0, 1])


class TestDegrees:

    def test_unit_weights(self, toy_hypergraph):
        degrees = compute_degrees(toy_hypergraph)
        np.testing.assert_array_equal(degrees.node_degrees, [2, 1, 2, 2, 1, 2])
        np.testing.assert_array_equal(degrees.hyperedge_degrees, [3, 2, 3, 2])

    def test_weighted_node_degree(self):
        h = Hypergraph(3, [[0, 1], [1, 2]], np.zeros((3, 1)), weights=[2.0, 0.5])
        np.testing.assert_allclose(compute_degrees(h).node_degrees, [2.0, 2.5, 0.5])

    def test_isolated_node_has_zero_degree(self):
        h = Hypergraph(3, [[0, 1]], np.zeros((3, 1)))
        assert compute_degrees(h).node_degrees[2] == 0

    def test_safe_inverse_zero_convention(self):
        np.testing.assert_array_equal(safe_inverse([0.0, 2.0, 4.0]), [0.0, 0.5, 0.25])

    def test_agrees_with_dense_matvec(self, hypergraph_factory):
        rng = np.random.default_rng(33)
        for _ in range(50):
            num_nodes, num_edges = rng.integers(1, 51, size=2)
            shape = hypergraph_factory(rng, num_nodes=int(num_nodes), num_edges=int(num_edges), max_size=10)
            weights = rng.uniform(0.1, 5.0, size=int(num_edges))
            h = Hypergraph(int(num_nodes), shape.edge_nodes, shape.features, weights=weights)
            dense = h.dense_incidence()
            degrees = compute_degrees(h)
            np.testing.assert_allclose(degrees.node_degrees, dense @ weights, rtol=1e-12)
            np.testing.assert_array_equal(degrees.hyperedge_degrees, dense.T @ np.ones(h.num_nodes))


class TestPropagationOperators:

    def test_edge_operator_averages_members(self, toy_hypergraph):
        h = toy_hypergraph
        edge_op, _ = propagation_operators(h.incidence_matrix(), h.weights)
        pooled = edge_op @ h.features
        for j, members in enumerate(h.edge_nodes):
            np.testing.assert_allclose(pooled[j], h.features[members].mean(axis=0))

    def test_node_operator_rows_sum_to_one(self, toy_hypergraph):
        h = toy_hypergraph
        _, node_op = propagation_operators(h.incidence_matrix(), h.weights)
        np.testing.assert_allclose(np.asarray(node_op.sum(axis=1)).ravel(), np.ones(6))

    def test_zero_degree_rows_are_zero(self):
        h = Hypergraph(3, [[0, 1]], np.zeros((3, 1)))
        _, node_op = propagation_operators(h.incidence_matrix(), h.weights)
        assert not np.any(node_op.toarray()[2])
