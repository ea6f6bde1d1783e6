"""Immutable hypergraph container and degree computation.

Incidence is held as two adjacency lists (node -> hyperedges, hyperedge ->
nodes). A scipy CSR incidence matrix is derived once for the sparse kernels.
"""
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from exceptions import DatasetError


def _frozen(array):
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class DegreeVectors:
    """Node degrees d(v) = sum_j w_j h_vj and hyperedge sizes delta(e)"""
    node_degrees: np.ndarray
    hyperedge_degrees: np.ndarray


class Hypergraph:
    """Hypergraph with dense node features, positive hyperedge weights and optional labels"""

    def __init__(self, num_nodes: int, hyperedges: Sequence[Sequence[int]], features,
                 weights=None, labels=None, num_classes: Optional[int] = None):
        """Validate and freeze the hypergraph

        Raises:
            DatasetError: out-of-range node id, empty hyperedge, repeated member,
                non-positive weight or feature/label row mismatch.
        """
        if num_nodes < 1:
            raise DatasetError(f"num_nodes must be positive, got {num_nodes}")
        self._num_nodes = int(num_nodes)

        features = np.asarray(features, dtype=np.float64)
        if features.ndim == 1:
            features = features.reshape(-1, 1)
        if features.ndim != 2 or features.shape[0] != self._num_nodes:
            raise DatasetError(
                f"Feature matrix has {features.shape[0] if features.ndim else 0} rows, expected {self._num_nodes}")
        if not np.all(np.isfinite(features)):
            raise DatasetError("Feature matrix contains non-finite values")
        self._features = _frozen(features.copy())

        edge_nodes = []
        for j, members in enumerate(hyperedges):
            members = np.asarray(list(members), dtype=np.int64)
            if members.size == 0:
                raise DatasetError(f"Hyperedge {j} is empty")
            if members.min() < 0 or members.max() >= self._num_nodes:
                bad = members[(members < 0) | (members >= self._num_nodes)][0]
                raise DatasetError(f"Hyperedge {j} references node {bad} outside [0, {self._num_nodes})")
            if np.unique(members).size != members.size:
                raise DatasetError(f"Hyperedge {j} lists a node more than once")
            edge_nodes.append(_frozen(np.sort(members)))
        self._edge_nodes = tuple(edge_nodes)
        num_edges = len(self._edge_nodes)

        if weights is None:
            weights = np.ones(num_edges, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        if weights.size != num_edges:
            raise DatasetError(f"Got {weights.size} hyperedge weights for {num_edges} hyperedges")
        if num_edges and not np.all(weights > 0):
            raise DatasetError("Hyperedge weights must be strictly positive")
        self._weights = _frozen(weights.copy())

        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64).reshape(-1)
            if labels.size != self._num_nodes:
                raise DatasetError(f"Got {labels.size} labels for {self._num_nodes} nodes")
            if labels.min() < 0:
                raise DatasetError("Class labels must be non-negative integers")
            inferred = int(labels.max()) + 1
            if num_classes is None:
                num_classes = inferred
            elif num_classes < inferred:
                raise DatasetError(f"num_classes={num_classes} but label {inferred - 1} present")
            labels = _frozen(labels.copy())
        self._labels = labels
        self._num_classes = int(num_classes) if num_classes is not None else None

        # transpose view: node -> hyperedges, built from the same entries
        per_node = [[] for _ in range(self._num_nodes)]
        for j, members in enumerate(self._edge_nodes):
            for i in members:
                per_node[i].append(j)
        self._node_edges = tuple(_frozen(np.asarray(lst, dtype=np.int64)) for lst in per_node)

        rows = np.concatenate(self._edge_nodes) if num_edges else np.zeros(0, dtype=np.int64)
        cols = np.repeat(np.arange(num_edges), [m.size for m in self._edge_nodes])
        self._incidence = sp.csr_matrix(
            (np.ones(rows.size), (rows, cols)), shape=(self._num_nodes, num_edges))

    @property
    def num_nodes(self):
        return self._num_nodes

    @property
    def num_hyperedges(self):
        return len(self._edge_nodes)

    @property
    def num_features(self):
        return self._features.shape[1]

    @property
    def features(self):
        return self._features

    @property
    def weights(self):
        return self._weights

    @property
    def labels(self):
        return self._labels

    @property
    def num_classes(self):
        return self._num_classes

    @property
    def edge_nodes(self):
        """Hyperedge -> sorted member node ids"""
        return self._edge_nodes

    @property
    def node_edges(self):
        """Node -> sorted incident hyperedge ids"""
        return self._node_edges

    @property
    def num_memberships(self):
        return int(self._incidence.nnz)

    def incidence_matrix(self):
        """Sparse |V| x |E| binary incidence matrix H (a copy)"""
        return self._incidence.copy()

    def dense_incidence(self):
        """Dense H; meant for oracles on small instances"""
        return self._incidence.toarray()

    def __repr__(self):
        return (f"{self.__class__.__name__}(num_nodes={self.num_nodes}, "
                f"num_hyperedges={self.num_hyperedges}, num_features={self.num_features}, "
                f"num_classes={self.num_classes})")


def degrees_from_incidence(incidence, weights):
    """Degree vectors of an arbitrary (possibly masked) incidence matrix"""
    incidence = sp.csr_matrix(incidence)
    weights = np.asarray(weights, dtype=np.float64)
    node_degrees = np.asarray(incidence @ weights).reshape(-1)
    hyperedge_degrees = np.asarray(incidence.sum(axis=0)).reshape(-1).astype(np.int64)
    return DegreeVectors(node_degrees=node_degrees, hyperedge_degrees=hyperedge_degrees)


def compute_degrees(h: Hypergraph) -> DegreeVectors:
    """Compute d(v) and delta(e) for the hypergraph"""
    return degrees_from_incidence(h.incidence_matrix(), h.weights)


def safe_inverse(values):
    """Element-wise reciprocal with the 0^-1 := 0 convention"""
    values = np.asarray(values, dtype=np.float64)
    out = np.zeros_like(values)
    nonzero = values != 0
    out[nonzero] = 1.0 / values[nonzero]
    return out


def propagation_operators(incidence, weights, degrees: Optional[DegreeVectors] = None):
    """Sparse mean-pooling operators for one view

    Returns:
        (edge_op, node_op) with edge_op = De^-1 H^T (|E| x |V|) and
        node_op = Dv^-1 H W (|V| x |E|). Rows of zero-degree entities are zero.
    """
    incidence = sp.csr_matrix(incidence, dtype=np.float64)
    if degrees is None:
        degrees = degrees_from_incidence(incidence, weights)
    edge_op = sp.diags(safe_inverse(degrees.hyperedge_degrees)) @ incidence.T
    node_op = sp.diags(safe_inverse(degrees.node_degrees)) @ incidence @ sp.diags(np.asarray(weights, dtype=np.float64))
    return sp.csr_matrix(edge_op), sp.csr_matrix(node_op)
