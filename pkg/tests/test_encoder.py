import numpy as np
import pytest

from augment import AugmentConfig, HypergraphView, make_view
from diffnum import Tape, grad_check, parameter
from encoder import EncoderLayer, EncoderParams, embed, encode, glorot_uniform
from exceptions import ShapeMismatchError
from hypergraph import Hypergraph


def _identity_params(dim=1, slope=1.0):
    return EncoderParams([EncoderLayer(theta_e=parameter(np.eye(dim)), theta_v=parameter(np.eye(dim)),
                                       slope_e=parameter(slope), slope_v=parameter(slope))])


def _prelu(x, a):
    return np.where(x > 0, x, a * x)


def _dense_forward(h, params):
    """Mean pooling with explicitly inverted degree diagonals"""
    H = h.dense_incidence()
    W = np.diag(h.weights)
    dv = H @ h.weights
    de = H.sum(axis=0)
    dv_inv = np.diag([1.0 / x if x else 0.0 for x in dv])
    de_inv = np.diag([1.0 / x if x else 0.0 for x in de])
    z_v = np.asarray(h.features)
    for layer in params.layers:
        z_e = _prelu(de_inv @ H.T @ z_v @ layer.theta_e.values, layer.slope_e.item())
        z_v = _prelu(dv_inv @ H @ W @ z_e @ layer.theta_v.values, layer.slope_v.item())
    return z_v, z_e


class TestForward:

    def test_mean_pooling_with_identity_weights(self):
        h = Hypergraph(2, [[0, 1]], [[1.0], [3.0]])
        out = encode(h, _identity_params(), Tape())
        np.testing.assert_allclose(out.hyperedges.values, [[2.0]])
        np.testing.assert_allclose(out.nodes.values, [[2.0], [2.0]])

    @pytest.mark.parametrize("layers", [1, 2])
    def test_matches_dense_oracle(self, layers):
        rng = np.random.default_rng(layers)
        h = Hypergraph(8, [[0, 1, 2], [2, 3], [4, 5, 6], [1, 7]], rng.normal(size=(8, 3)),
                       weights=[1.0, 2.0, 0.5, 1.5])
        params = EncoderParams.initialize(3, 5, layers, rng)
        nodes, hyperedges = embed(h, params)
        oracle_nodes, oracle_edges = _dense_forward(h, params)
        np.testing.assert_allclose(nodes, oracle_nodes, atol=1e-12)
        np.testing.assert_allclose(hyperedges, oracle_edges, atol=1e-12)

    def test_masked_hyperedge_embeds_to_zero(self, toy_hypergraph, rng):
        params = EncoderParams.initialize(3, 4, 1, rng)
        incidence = toy_hypergraph.incidence_matrix().tolil()
        incidence[:, 1] = 0
        view = HypergraphView(toy_hypergraph.features, incidence, toy_hypergraph.weights)
        out = encode(view, params, Tape())
        np.testing.assert_array_equal(out.hyperedges.values[1], np.zeros(4))

    def test_hyperedge_in_member_hull(self, rng):
        h = Hypergraph(4, [[0, 1, 2], [2, 3]], rng.normal(size=(4, 1)))
        out = encode(h, _identity_params(), Tape())
        for j, members in enumerate(h.edge_nodes):
            value = out.hyperedges.values[j, 0]
            assert h.features[members].min() - 1e-12 <= value <= h.features[members].max() + 1e-12

    def test_node_permutation_equivariance(self, toy_hypergraph, rng):
        params = EncoderParams.initialize(3, 4, 1, rng)
        perm = np.array([3, 0, 5, 1, 4, 2])
        inverse = np.argsort(perm)
        permuted = Hypergraph(6, [[int(inverse[v]) for v in m] for m in toy_hypergraph.edge_nodes],
                              toy_hypergraph.features[perm])
        nodes, edges = embed(toy_hypergraph, params)
        p_nodes, p_edges = embed(permuted, params)
        np.testing.assert_allclose(p_nodes, nodes[perm], atol=1e-12)
        np.testing.assert_allclose(p_edges, edges, atol=1e-12)

    def test_feature_width_mismatch(self, toy_hypergraph, rng):
        params = EncoderParams.initialize(5, 4, 1, rng)
        with pytest.raises(ShapeMismatchError):
            encode(toy_hypergraph, params, Tape())


class TestParams:

    def test_glorot_range(self, rng):
        values = glorot_uniform(30, 20, rng)
        assert np.abs(values).max() <= np.sqrt(6.0 / 50)

    def test_named_parameters(self, rng):
        params = EncoderParams.initialize(3, 4, 2, rng)
        assert list(params.named_parameters()) == [
            "layer0.theta_e", "layer0.theta_v", "layer0.slope_e", "layer0.slope_v",
            "layer1.theta_e", "layer1.theta_v", "layer1.slope_e", "layer1.slope_v"]
        assert params.named_parameters()["layer1.theta_e"].shape == (4, 4)
        assert len(params.weight_matrices()) == 4

    def test_slopes_start_at_init_value(self, rng):
        params = EncoderParams.initialize(3, 4, 1, rng, prelu_init=0.25)
        assert params.layers[0].slope_e.item() == 0.25

    def test_layers_must_chain(self, rng):
        first = EncoderParams.initialize(3, 4, 1, rng).layers[0]
        second = EncoderParams.initialize(5, 4, 1, rng).layers[0]
        with pytest.raises(ShapeMismatchError):
            EncoderParams([first, second])


class TestGradients:

    def test_encode_gradients(self, toy_hypergraph, rng):
        params = EncoderParams.initialize(3, 3, 2, rng)
        view = make_view(toy_hypergraph, AugmentConfig(0.2, 0.2), np.random.default_rng(0))

        def loss(tape):
            out = encode(view, params, tape)
            return tape.add(tape.frobenius_sq(out.nodes), tape.reduce_sum(out.hyperedges))
        assert grad_check(loss, list(params.named_parameters().values())) < 1e-4
