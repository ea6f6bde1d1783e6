"""Self-supervised objectives: node/group CCA losses and hierarchical membership contrast."""
import math
from dataclasses import dataclass

import numpy as np

from diffnum import Tape, Tensor, constant, parameter
from encoder import glorot_uniform
from exceptions import ConfigError, ShapeMismatchError
from membership_index import MembershipIndex, sample_pairs


class DiscriminatorParams:
    """Bilinear node-hyperedge scorer D(v, e) = z_v^T B z_e

    ``calls`` counts every score evaluated through this instance.
    """

    def __init__(self, bilinear: Tensor):
        if bilinear.rows != bilinear.cols:
            raise ShapeMismatchError(f"Bilinear matrix must be square, got {bilinear.shape}")
        self.bilinear = bilinear
        self.calls = 0

    @classmethod
    def initialize(cls, dim, rng):
        return cls(parameter(glorot_uniform(dim, dim, rng), name="disc.bilinear"))

    @property
    def dim(self):
        return self.bilinear.rows

    def named_parameters(self):
        return {"disc.bilinear": self.bilinear}


@dataclass(frozen=True)
class LossWeights:
    lambda_n: float = 1e-3
    lambda_g: float = 1e-3
    tau: float = 0.5
    alpha: float = 0.65
    hop_range: int = 1
    samples: int = 10

    def validate(self):
        if self.lambda_n < 0 or self.lambda_g < 0:
            raise ConfigError("Decorrelation weights must be non-negative")
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.hop_range < 1 or self.samples < 1:
            raise ConfigError("hop_range and samples must be >= 1")
        return self


def normalize_embeddings(z: Tensor, tape: Tape) -> Tensor:
    """Center each column and scale it to unit norm: (Z - mu) / (sigma * sqrt(N))"""
    if z.rows < 2:
        raise ShapeMismatchError(f"Normalization needs at least 2 rows, got {z.rows}")
    centered = tape.sub(z, tape.column_mean(z))
    spread = tape.scale(tape.column_std(z), math.sqrt(z.rows))
    return tape.div(centered, spread)


def cca_terms(z1: Tensor, z2: Tensor, tape: Tape):
    """Invariance term ||Z1 - Z2||^2 and decorrelation term sum_i ||Zi^T Zi - I||^2"""
    if z1.shape != z2.shape:
        raise ShapeMismatchError(f"cca_loss: view shapes {z1.shape} and {z2.shape} differ")
    invariance = tape.frobenius_sq(tape.sub(z1, z2))
    identity = constant(np.eye(z1.cols))
    decorrelation = tape.add(
        tape.frobenius_sq(tape.sub(tape.matmul(tape.transpose(z1), z1), identity)),
        tape.frobenius_sq(tape.sub(tape.matmul(tape.transpose(z2), z2), identity)))
    return invariance, decorrelation


def cca_loss(z1: Tensor, z2: Tensor, lam: float, tape: Tape) -> Tensor:
    """||Z1 - Z2||_F^2 + lam * (||Z1^T Z1 - I||_F^2 + ||Z2^T Z2 - I||_F^2)"""
    invariance, decorrelation = cca_terms(z1, z2, tape)
    return tape.add(invariance, tape.scale(decorrelation, lam))


def discriminator_score(z_v: Tensor, z_e: Tensor, disc: DiscriminatorParams, tape: Tape) -> Tensor:
    """z_v^T B z_e for one node row and one hyperedge row"""
    if z_v.shape != (1, disc.dim) or z_e.shape != (1, disc.dim):
        raise ShapeMismatchError(f"discriminator_score expects 1x{disc.dim} rows, got {z_v.shape}, {z_e.shape}")
    disc.calls += 1
    return tape.matmul(tape.matmul(z_v, disc.bilinear), tape.transpose(z_e))


def pair_scores(z_nodes: Tensor, z_edges: Tensor, nodes, edges, disc: DiscriminatorParams, tape: Tape) -> Tensor:
    """Column vector of D(nodes[i], edges[i]) for index arrays of equal length"""
    nodes = np.asarray(nodes, dtype=np.int64)
    disc.calls += int(nodes.size)
    projected = tape.matmul(z_nodes, disc.bilinear)
    return tape.paired_row_dot(projected, z_edges, nodes, edges)


def _log_positive_ratio(scores: Tensor, positive, segments, num_segments, tau, tape):
    """log of sum_P e^{s/tau} / sum_{P+N} e^{s/tau}, per segment"""
    logits = tape.scale(scores, 1.0 / tau)
    everything = tape.segment_logsumexp(logits, segments, num_segments)
    rows = np.flatnonzero(positive)
    positives = tape.segment_logsumexp(tape.take_rows(logits, rows), segments[rows], num_segments)
    return tape.sub(positives, everything)


def hop_loss(v, positives, negatives, z_nodes: Tensor, z_edges: Tensor,
             disc: DiscriminatorParams, tau: float, tape: Tape) -> Tensor:
    """Multi-positive contrast L_k(v) of one node against its k and k+1 hop sets"""
    positives = np.asarray(positives, dtype=np.int64)
    negatives = np.asarray(negatives, dtype=np.int64)
    if positives.size == 0:
        raise ValueError(f"hop_loss for node {v} needs at least one positive")
    if negatives.size == 0:
        return Tensor(0.0)
    edges = np.concatenate([positives, negatives])
    is_positive = np.concatenate([np.ones(positives.size, bool), np.zeros(negatives.size, bool)])
    scores = pair_scores(z_nodes, z_edges, np.full(edges.size, v), edges, disc, tape)
    segments = np.zeros(edges.size, dtype=np.int64)
    return tape.scale(_log_positive_ratio(scores, is_positive, segments, 1, tau, tape), -1.0)


@dataclass
class MembershipLoss:
    loss: Tensor
    active_terms: int
    discriminator_calls: int
    mean_ratio: float


def hierarchical_membership_loss(h, index: MembershipIndex, z_nodes: Tensor, z_edges: Tensor,
                                 disc: DiscriminatorParams, weights: LossWeights, rng, tape: Tape,
                                 normalize_active=False) -> MembershipLoss:
    """L_HM = -sum_v (1/K) sum_k log min(r_k(v), alpha) over freshly sampled pairs

    A (v, k) term whose sampled positive or negative set is empty contributes
    nothing. With ``normalize_active`` the sum is rescaled by
    |V| * K / active_terms instead of 1 / K.
    """
    if index.hop_range != weights.hop_range:
        raise ConfigError(f"Index built for K={index.hop_range}, weights use K={weights.hop_range}")

    node_ids, edge_ids, segment_ids, positive_flags = [], [], [], []
    active = 0
    for v in range(h.num_nodes):
        for k in range(1, weights.hop_range + 1):
            sample = sample_pairs(index, v, k, weights.samples, rng)
            if sample.skip:
                continue
            size = sample.positives.size + sample.negatives.size
            node_ids.append(np.full(size, v, dtype=np.int64))
            edge_ids.append(np.concatenate([sample.positives, sample.negatives]))
            segment_ids.append(np.full(size, active, dtype=np.int64))
            positive_flags.append(np.concatenate([np.ones(sample.positives.size, bool),
                                                  np.zeros(sample.negatives.size, bool)]))
            active += 1

    if active == 0:
        return MembershipLoss(loss=Tensor(0.0), active_terms=0, discriminator_calls=0, mean_ratio=float("nan"))

    nodes = np.concatenate(node_ids)
    calls_before = disc.calls
    scores = pair_scores(z_nodes, z_edges, nodes, np.concatenate(edge_ids), disc, tape)
    log_ratio = _log_positive_ratio(scores, np.concatenate(positive_flags),
                                    np.concatenate(segment_ids), active, weights.tau, tape)
    capped = tape.minimum(log_ratio, math.log(weights.alpha))
    total = tape.reduce_sum(capped)
    if normalize_active:
        factor = -h.num_nodes / active
    else:
        factor = -1.0 / weights.hop_range
    return MembershipLoss(
        loss=tape.scale(total, factor),
        active_terms=active,
        discriminator_calls=disc.calls - calls_before,
        mean_ratio=float(np.exp(log_ratio.values).mean()),
    )
