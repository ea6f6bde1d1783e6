import logging
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List

import numpy as np

from augment import AugmentConfig, HypergraphView, make_view_pair
from diffnum import Tape, Tensor, sum_all
from encoder import EncoderParams, encode
from exceptions import ConfigError, DatasetError, NonFiniteError
from membership_index import MembershipIndex, build_index
from objectives import (DiscriminatorParams, LossWeights, cca_terms, hierarchical_membership_loss,
                        normalize_embeddings)
from platform_utils import PlatformUtils

ABLATIONS = ("full", "no_node", "no_group", "no_membership")

# child-stream tags under the run seed
_INIT_STREAM = 0
_VIEW_STREAM = 1
_SAMPLE_STREAM = 2
_MONITOR_STREAM = 3


@dataclass
class TrainConfig:
    """Every hyperparameter of one self-supervised training run"""
    embedding_dim: int = 512
    layers: int = 1
    epochs: int = 200
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    lambda1: float = 1.0
    lambda2: float = 0.18
    lambda3: float = 0.05
    lambda_n: float = 1e-3
    lambda_g: float = 1e-3
    tau: float = 0.5
    alpha: float = 0.65
    hops: int = 1
    samples: int = 10
    view1_p_feature: float = 0.2
    view1_p_membership: float = 0.2
    view2_p_feature: float = 0.2
    view2_p_membership: float = 0.2
    seed: int = 0
    prelu_init: float = 0.25
    ablation: str = "full"
    hm_normalize_active: bool = False
    log_every: int = 10
    monitor_views: int = 32

    def validate(self):
        """Check field ranges, raising ConfigError on the first violation"""
        for name in ("lambda1", "lambda2", "lambda3", "lambda_n", "lambda_g", "learning_rate"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.adam_eps <= 0:
            raise ConfigError(f"adam_eps must be positive, got {self.adam_eps}")
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        for name in ("embedding_dim", "layers", "hops", "samples", "log_every"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.monitor_views < 0:
            raise ConfigError(f"monitor_views must be >= 0, got {self.monitor_views}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        for name in ("adam_beta1", "adam_beta2"):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigError(f"{name} must lie in [0, 1), got {getattr(self, name)}")
        if self.ablation not in ABLATIONS:
            raise ConfigError(f"ablation must be one of {', '.join(ABLATIONS)}, got {self.ablation!r}")
        for aug in self.augment_configs():
            aug.validate()
        return self

    def augment_configs(self):
        return (AugmentConfig(self.view1_p_feature, self.view1_p_membership),
                AugmentConfig(self.view2_p_feature, self.view2_p_membership))

    def loss_weights(self):
        return LossWeights(lambda_n=self.lambda_n, lambda_g=self.lambda_g, tau=self.tau,
                           alpha=self.alpha, hop_range=self.hops, samples=self.samples)

    def signal_weights(self):
        """Effective (w_N, w_G, w_HM) after applying the ablation switch"""
        return (0.0 if self.ablation == "no_node" else 1.0,
                0.0 if self.ablation == "no_group" else self.lambda1,
                0.0 if self.ablation == "no_membership" else self.lambda2)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass
class AdamState:
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params, grads, state: AdamState, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Bias-corrected Adam update

    Args:
        params: name -> current array.
        grads: name -> gradient array of the same shape.
    Returns:
        (updated params dict, updated AdamState). Inputs are not modified.
    """
    step = state.step + 1
    bc1 = 1.0 - beta1 ** step
    bc2 = 1.0 - beta2 ** step
    new_params, new_m, new_v = {}, {}, {}
    for name, value in params.items():
        g = grads[name]
        m = state.m.get(name, np.zeros_like(value))
        v = state.v.get(name, np.zeros_like(value))
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        new_params[name] = value - lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(step=step, m=new_m, v=new_v)


class Adam:
    """Adam over a fixed set of named tensors, updated in place"""

    def __init__(self, named_tensors, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.named_tensors = dict(named_tensors)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = AdamState()

    def step(self, grads):
        """Apply one update from a Gradients object or a name -> array mapping"""
        if isinstance(grads, dict):
            by_name = grads
        else:
            by_name = {name: grads[t] for name, t in self.named_tensors.items()}
        current = {name: t.values for name, t in self.named_tensors.items()}
        updated, self.state = adam_step(current, by_name, self.state, self.lr, self.beta1, self.beta2, self.eps)
        for name, tensor in self.named_tensors.items():
            tensor.values = updated[name]


@dataclass
class EpochRecord:
    epoch: int
    node_loss: float
    group_loss: float
    membership_loss: float
    l2: float
    total: float
    active_terms: int
    mean_ratio: float
    discriminator_calls: int
    seconds: float


@dataclass
class TrainReport:
    config: dict
    signal_weights: dict
    epochs: List[EpochRecord] = field(default_factory=list)
    wall_time: float = 0.0
    discriminator_calls: int = 0
    index_build_seconds: float = 0.0
    monitor: dict = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)
    system: dict = field(default_factory=dict)

    def to_dict(self):
        doc = asdict(self)
        for record in doc["epochs"]:
            if not np.isfinite(record["mean_ratio"]):
                record["mean_ratio"] = None
        return doc


@dataclass
class LossBreakdown:
    """Tape tensors of one evaluation of the joint objective"""
    node: Tensor
    group: Tensor
    membership: Tensor
    l2: Tensor
    total: Tensor
    active_terms: int
    discriminator_calls: int
    mean_ratio: float

    def as_floats(self):
        return {"node_loss": self.node.item(), "group_loss": self.group.item(),
                "membership_loss": self.membership.item(), "l2": self.l2.item(),
                "total": self.total.item()}


class Trainer:
    """Joint optimisation of the node, group and membership objectives"""

    def __init__(self, config: TrainConfig, logger=None):
        self.config = config.validate()
        self.logger = logger or logging.getLogger('SEHSSL')

    def _stream(self, tag, epoch=0):
        return np.random.default_rng(np.random.SeedSequence([self.config.seed, tag, epoch]))

    def initialize(self, h):
        """Fresh encoder and discriminator parameters from the run seed"""
        rng = self._stream(_INIT_STREAM)
        params = EncoderParams.initialize(h.num_features, self.config.embedding_dim, self.config.layers,
                                          rng, prelu_init=self.config.prelu_init)
        disc = DiscriminatorParams.initialize(self.config.embedding_dim, rng)
        return params, disc

    def draw_views(self, h, epoch):
        """The two augmented views of one epoch"""
        first, second = self.config.augment_configs()
        seeds = np.random.SeedSequence([self.config.seed, _VIEW_STREAM, epoch])
        return make_view_pair(h, first, second, seeds)

    def sampling_rng(self, epoch):
        return self._stream(_SAMPLE_STREAM, epoch)

    @staticmethod
    def check_trainable(h):
        """Reject hypergraphs with fewer than two nodes or two hyperedges"""
        if h.num_nodes < 2 or h.num_hyperedges < 2:
            raise DatasetError(f"Training needs at least 2 nodes and 2 hyperedges, got "
                               f"{h.num_nodes} nodes and {h.num_hyperedges} hyperedges")

    def monitor_loss(self, h, original: HypergraphView, index: MembershipIndex,
                     params: EncoderParams, disc: DiscriminatorParams):
        """Mean total objective over ``monitor_views`` fixed view pairs and sample draws

        The draws depend only on the run seed, so values taken at different
        epochs are directly comparable. Returns None when ``monitor_views`` is 0.
        """
        cfg = self.config
        if cfg.monitor_views == 0:
            return None
        first, second = cfg.augment_configs()
        calls = disc.calls
        totals = []
        for draw in range(cfg.monitor_views):
            views = make_view_pair(h, first, second, np.random.SeedSequence([cfg.seed, _MONITOR_STREAM, draw, 0]))
            rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _MONITOR_STREAM, draw, 1]))
            losses = self.objective(h, original, views, index, params, disc, rng, Tape(record=False))
            totals.append(losses.total.item())
        disc.calls = calls
        return float(np.mean(totals))

    def objective(self, h, original: HypergraphView, views, index: MembershipIndex,
                  params: EncoderParams, disc: DiscriminatorParams, rng, tape: Tape) -> LossBreakdown:
        """Build L = w_N L_N + w_G L_G + w_HM L_HM + lambda3 ||Theta||^2 on ``tape``"""
        cfg = self.config
        weights = cfg.loss_weights()
        w_node, w_group, w_membership = cfg.signal_weights()

        first = encode(views[0], params, tape)
        second = encode(views[1], params, tape)
        inv_n, dec_n = cca_terms(normalize_embeddings(first.nodes, tape),
                                 normalize_embeddings(second.nodes, tape), tape)
        node = tape.add(inv_n, tape.scale(dec_n, weights.lambda_n))
        inv_g, dec_g = cca_terms(normalize_embeddings(first.hyperedges, tape),
                                 normalize_embeddings(second.hyperedges, tape), tape)
        group = tape.add(inv_g, tape.scale(dec_g, weights.lambda_g))

        base = encode(original, params, tape)
        membership = hierarchical_membership_loss(h, index, base.nodes, base.hyperedges, disc, weights, rng,
                                                  tape, normalize_active=cfg.hm_normalize_active)

        l2 = sum_all(tape, (tape.frobenius_sq(m) for m in params.weight_matrices()))
        total = sum_all(tape, (tape.scale(node, w_node), tape.scale(group, w_group),
                               tape.scale(membership.loss, w_membership), tape.scale(l2, cfg.lambda3)))
        return LossBreakdown(node=node, group=group, membership=membership.loss, l2=l2, total=total,
                             active_terms=membership.active_terms,
                             discriminator_calls=membership.discriminator_calls,
                             mean_ratio=membership.mean_ratio)

    def train(self, h, index: MembershipIndex = None, params: EncoderParams = None,
              disc: DiscriminatorParams = None, start_epoch: int = 1):
        """Run the epoch loop; returns (EncoderParams, DiscriminatorParams, TrainReport)"""
        cfg = self.config
        self.check_trainable(h)
        started = time.perf_counter()
        if params is None or disc is None:
            params, disc = self.initialize(h)

        index_seconds = 0.0
        if index is None:
            index_started = time.perf_counter()
            index = build_index(h, cfg.hops, logger=self.logger)
            index_seconds = time.perf_counter() - index_started

        named = {**params.named_parameters(), **disc.named_parameters()}
        optimizer = Adam(named, lr=cfg.learning_rate, beta1=cfg.adam_beta1, beta2=cfg.adam_beta2, eps=cfg.adam_eps)
        original = HypergraphView.from_hypergraph(h)
        w_node, w_group, w_membership = cfg.signal_weights()
        report = TrainReport(config=cfg.to_dict(),
                             signal_weights={"node": w_node, "group": w_group,
                                             "membership": w_membership, "l2": cfg.lambda3},
                             index_build_seconds=index_seconds)

        self.logger.info(f"Training on {h!r} for {cfg.epochs} epochs (D={cfg.embedding_dim}, K={cfg.hops}, "
                         f"d={cfg.samples}, ablation={cfg.ablation})")
        initial = self.monitor_loss(h, original, index, params, disc)
        for epoch in range(start_epoch, start_epoch + cfg.epochs):
            epoch_started = time.perf_counter()
            tape = Tape()
            try:
                losses = self.objective(h, original, self.draw_views(h, epoch), index, params, disc,
                                        self.sampling_rng(epoch), tape)
            except NonFiniteError as e:
                self.logger.error(f"Non-finite value in {e.op} at epoch {epoch}")
                raise NonFiniteError(f"Epoch {epoch}: {e}", op=e.op, epoch=epoch) from e

            breakdown = losses.as_floats()
            if not np.isfinite(breakdown["total"]):
                raise NonFiniteError(f"Epoch {epoch}: non-finite loss {breakdown}", epoch=epoch, breakdown=breakdown)

            optimizer.step(tape.backward(losses.total))
            report.discriminator_calls += losses.discriminator_calls
            record = EpochRecord(epoch=epoch, active_terms=losses.active_terms, mean_ratio=losses.mean_ratio,
                                 discriminator_calls=losses.discriminator_calls,
                                 seconds=time.perf_counter() - epoch_started, **breakdown)
            report.epochs.append(record)

            message = (f"Epoch {epoch}: total={record.total:.6f} L_N={record.node_loss:.6f} "
                       f"L_G={record.group_loss:.6f} L_HM={record.membership_loss:.6f} L2={record.l2:.4f}")
            if epoch % cfg.log_every == 0 or epoch == start_epoch:
                self.logger.info(message)
            else:
                self.logger.debug(message)

        final = self.monitor_loss(h, original, index, params, disc) if cfg.epochs else initial
        report.monitor = {"views": cfg.monitor_views, "initial_total": initial, "final_total": final}
        if initial is not None:
            self.logger.info(f"Monitored total over {cfg.monitor_views} fixed views: "
                             f"{initial:.6f} -> {final:.6f}")

        report.wall_time = time.perf_counter() - started
        report.parameters = {name: list(t.shape) for name, t in named.items()}
        report.system = PlatformUtils.get_system_info()
        self.logger.info(f"Training finished in {report.wall_time:.2f}s; "
                         f"{report.discriminator_calls} discriminator evaluations")
        return params, disc, report


def train(h, cfg: TrainConfig, logger=None):
    """Train from scratch; returns (EncoderParams, DiscriminatorParams, TrainReport)"""
    return Trainer(cfg, logger).train(h)
