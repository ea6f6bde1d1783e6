"""Hypergraph encoder with element-wise mean pooling.

Per layer l, hyperedges are pooled from nodes and nodes from hyperedges:

    Z_E = prelu(De^-1 H^T  Z_V Theta_E)
    Z_V = prelu(Dv^-1 H W  Z_E Theta_V)

with Z_V initialised to the (masked) feature matrix. Inverse degrees of
zero-degree entities are taken as 0, so masked-out rows stay at zero.
"""
from dataclasses import dataclass
from typing import List

import numpy as np

from augment import HypergraphView
from diffnum import Tape, Tensor, constant, parameter
from exceptions import ShapeMismatchError
from hypergraph import Hypergraph


def glorot_uniform(fan_in, fan_out, rng):
    """Uniform init in +-sqrt(6 / (fan_in + fan_out))"""
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


@dataclass
class EncoderLayer:
    theta_e: Tensor
    theta_v: Tensor
    slope_e: Tensor
    slope_v: Tensor


class EncoderParams:
    """Per-layer aggregation weights and PReLU slopes"""

    def __init__(self, layers: List[EncoderLayer]):
        if not layers:
            raise ShapeMismatchError("Encoder needs at least one layer")
        for l, layer in enumerate(layers):
            dim = layer.theta_e.cols
            if layer.theta_v.shape != (dim, dim):
                raise ShapeMismatchError(f"Layer {l}: theta_v is {layer.theta_v.shape}, expected {(dim, dim)}")
            if l > 0 and layer.theta_e.rows != layers[l - 1].theta_v.cols:
                raise ShapeMismatchError(f"Layer {l}: theta_e input dim {layer.theta_e.rows} does not chain")
        self.layers = layers

    @classmethod
    def initialize(cls, in_dim, dim, num_layers, rng, prelu_init=0.25):
        layers = []
        fan_in = in_dim
        for l in range(num_layers):
            layers.append(EncoderLayer(
                theta_e=parameter(glorot_uniform(fan_in, dim, rng), name=f"layer{l}.theta_e"),
                theta_v=parameter(glorot_uniform(dim, dim, rng), name=f"layer{l}.theta_v"),
                slope_e=parameter(prelu_init, name=f"layer{l}.slope_e"),
                slope_v=parameter(prelu_init, name=f"layer{l}.slope_v"),
            ))
            fan_in = dim
        return cls(layers)

    @property
    def in_dim(self):
        return self.layers[0].theta_e.rows

    @property
    def dim(self):
        return self.layers[-1].theta_v.cols

    @property
    def num_layers(self):
        return len(self.layers)

    def named_parameters(self):
        """Ordered name -> tensor mapping of every trainable tensor"""
        named = {}
        for l, layer in enumerate(self.layers):
            named[f"layer{l}.theta_e"] = layer.theta_e
            named[f"layer{l}.theta_v"] = layer.theta_v
            named[f"layer{l}.slope_e"] = layer.slope_e
            named[f"layer{l}.slope_v"] = layer.slope_v
        return named

    def weight_matrices(self):
        """Theta_E and Theta_V of every layer (the L2-regularised set)"""
        return [m for layer in self.layers for m in (layer.theta_e, layer.theta_v)]


@dataclass
class Embeddings:
    nodes: Tensor
    hyperedges: Tensor


def encode(view, params: EncoderParams, tape: Tape) -> Embeddings:
    """Run the encoder on a hypergraph or an augmented view, recording on ``tape``"""
    if isinstance(view, Hypergraph):
        view = HypergraphView.from_hypergraph(view)
    features = np.asarray(view.features)
    if features.shape[1] != params.in_dim:
        raise ShapeMismatchError(
            f"Encoder expects {params.in_dim} input features, view has {features.shape[1]}")

    z_v = constant(features)
    z_e = None
    for layer in params.layers:
        z_e = tape.prelu(tape.sparse_matmul(view.edge_op, tape.matmul(z_v, layer.theta_e)), layer.slope_e)
        z_v = tape.prelu(tape.sparse_matmul(view.node_op, tape.matmul(z_e, layer.theta_v)), layer.slope_v)
    return Embeddings(nodes=z_v, hyperedges=z_e)


def embed(h, params: EncoderParams):
    """Inference pass on the original hypergraph; returns (Z_V, Z_E) arrays"""
    out = encode(h, params, Tape(record=False))
    return out.nodes.values, out.hyperedges.values
