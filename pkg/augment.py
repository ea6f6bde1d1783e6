"""Stochastic views of a hypergraph: feature-dimension masking and membership masking."""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from exceptions import ConfigError
from hypergraph import DegreeVectors, degrees_from_incidence, propagation_operators


@dataclass(frozen=True)
class AugmentConfig:
    """Drop probabilities for one view"""
    p_feature: float = 0.2
    p_membership: float = 0.2

    def validate(self):
        for name in ("p_feature", "p_membership"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}")
        return self


class HypergraphView:
    """Masked features and incidence of one view, with its degrees and pooling operators"""

    def __init__(self, features, incidence, weights):
        self.features = features
        self.incidence = sp.csr_matrix(incidence)
        self.weights = weights
        self.degrees: DegreeVectors = degrees_from_incidence(self.incidence, weights)
        self.edge_op, self.node_op = propagation_operators(self.incidence, weights, self.degrees)

    @property
    def num_nodes(self):
        return self.incidence.shape[0]

    @property
    def num_hyperedges(self):
        return self.incidence.shape[1]

    @classmethod
    def from_hypergraph(cls, h):
        """Unmasked view of the original hypergraph"""
        return cls(h.features, h.incidence_matrix(), h.weights)


def _check_probability(name, p):
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"{name} must lie in [0, 1], got {p}")


def mask_features(features, p_f, rng):
    """Zero whole feature columns, each with probability p_f (one mask shared by all rows)"""
    _check_probability("p_f", p_f)
    features = np.asarray(features, dtype=np.float64)
    keep = rng.random(features.shape[1]) >= p_f
    return features * keep[np.newaxis, :]


def mask_memberships(incidence, p_m, rng):
    """Drop each stored incidence entry independently with probability p_m"""
    _check_probability("p_m", p_m)
    coo = sp.coo_matrix(incidence)
    keep = rng.random(coo.nnz) >= p_m
    return sp.csr_matrix(
        (coo.data[keep], (coo.row[keep], coo.col[keep])), shape=coo.shape)


def make_view(h, cfg: AugmentConfig, rng) -> HypergraphView:
    """Draw one augmented view; features first, then memberships, from the same stream"""
    features = mask_features(h.features, cfg.p_feature, rng)
    incidence = mask_memberships(h.incidence_matrix(), cfg.p_membership, rng)
    return HypergraphView(features, incidence, h.weights)


def make_view_pair(h, cfg1: AugmentConfig, cfg2: AugmentConfig, seed_sequence):
    """Two independent views from independent child streams of one seed sequence"""
    first, second = seed_sequence.spawn(2)
    return (make_view(h, cfg1, np.random.default_rng(first)),
            make_view(h, cfg2, np.random.default_rng(second)))
