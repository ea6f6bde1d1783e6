"""Downstream evaluation of frozen node embeddings."""
import logging
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np
from scipy.special import softmax
from sklearn.cluster import KMeans
from sklearn.metrics import adjusted_rand_score, normalized_mutual_info_score

from exceptions import ConfigError, EvaluationError
from queue_manager import QueueManager
from trainer import AdamState, adam_step


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.10
    val: float = 0.10
    test: float = 0.80
    repeats: int = 20
    seed: int = 0

    def validate(self):
        if min(self.train, self.test) <= 0 or self.val < 0:
            raise ConfigError("train and test fractions must be positive, val non-negative")
        if abs(self.train + self.val + self.test - 1.0) > 1e-9:
            raise ConfigError(f"Split fractions sum to {self.train + self.val + self.test}, expected 1")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}")
        return self


@dataclass(frozen=True)
class ProbeConfig:
    steps: int = 500
    learning_rate: float = 1e-2
    l2: float = 1e-4
    max_split_retries: int = 1000


@dataclass(frozen=True)
class ClusterConfig:
    runs: int = 5
    max_iter: int = 300
    tol: float = 1e-4
    seed: int = 0


@dataclass
class EvalReport:
    accuracy_mean: Optional[float] = None
    accuracy_std: Optional[float] = None
    accuracies: List[float] = field(default_factory=list)
    nmi_mean: Optional[float] = None
    ari_mean: Optional[float] = None
    nmi_runs: List[float] = field(default_factory=list)
    ari_runs: List[float] = field(default_factory=list)

    def merge(self, other):
        """Combine a classification report with a clustering report"""
        merged = asdict(self)
        for key, value in asdict(other).items():
            if value not in (None, []):
                merged[key] = value
        return EvalReport(**merged)

    def to_dict(self):
        return asdict(self)


def split_indices(labels, spec: SplitSpec, rng, max_retries=1000):
    """Random train/val/test split whose training part covers every class"""
    labels = np.asarray(labels)
    n = labels.size
    n_train = int(round(spec.train * n))
    n_val = int(round(spec.val * n))
    if n_train < 1 or n - n_train - n_val < 1:
        raise EvaluationError(f"{n} nodes are too few for split {spec.train}/{spec.val}/{spec.test}")
    classes = np.unique(labels)
    for _ in range(max_retries):
        order = rng.permutation(n)
        train = order[:n_train]
        if np.unique(labels[train]).size == classes.size:
            return train, order[n_train:n_train + n_val], order[n_train + n_val:]
    raise EvaluationError(f"No training split covered all {classes.size} classes in {max_retries} draws")


def _accuracy(features, weights, bias, labels):
    if labels.size == 0:
        return 0.0
    return float(np.mean(np.argmax(features @ weights + bias, axis=1) == labels))


def fit_logistic_regression(features, labels, num_classes, probe: ProbeConfig,
                            val_features=None, val_labels=None):
    """Full-batch multinomial logistic regression trained with Adam

    Returns the (weights, bias) iterate with the best validation accuracy
    (earliest on ties), or the last iterate when no validation set is given.
    """
    n, dim = features.shape
    onehot = np.eye(num_classes)[labels]
    params = {"w": np.zeros((dim, num_classes)), "b": np.zeros((1, num_classes))}
    state = AdamState()
    use_val = val_labels is not None and len(val_labels) > 0
    best = (params["w"], params["b"])
    best_acc = _accuracy(val_features, *best, val_labels) if use_val else -1.0

    for _ in range(probe.steps):
        probs = softmax(features @ params["w"] + params["b"], axis=1)
        residual = (probs - onehot) / n
        grads = {"w": features.T @ residual + 2.0 * probe.l2 * params["w"],
                 "b": residual.sum(axis=0, keepdims=True)}
        params, state = adam_step(params, grads, state, probe.learning_rate)
        if use_val:
            acc = _accuracy(val_features, params["w"], params["b"], val_labels)
            if acc > best_acc:
                best_acc, best = acc, (params["w"], params["b"])
    if not use_val:
        best = (params["w"], params["b"])
    return best


def _probe_once(embeddings, labels, num_classes, spec, probe, repeat):
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, repeat]))
    train, val, test = split_indices(labels, spec, rng, probe.max_split_retries)
    weights, bias = fit_logistic_regression(embeddings[train], labels[train], num_classes, probe,
                                            embeddings[val], labels[val])
    return _accuracy(embeddings[test], weights, bias, labels[test])


def linear_probe(embeddings, labels, spec: SplitSpec = SplitSpec(), probe: ProbeConfig = ProbeConfig(),
                 num_classes=None, workers=1, logger=None) -> EvalReport:
    """Mean and std of test accuracy over ``spec.repeats`` random splits"""
    logger = logger or logging.getLogger('SEHSSL')
    if labels is None:
        raise EvaluationError("Linear probe needs node labels")
    spec.validate()
    embeddings = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if embeddings.shape[0] != labels.size:
        raise EvaluationError(f"{embeddings.shape[0]} embeddings for {labels.size} labels")
    num_classes = num_classes or int(labels.max()) + 1

    jobs = QueueManager(workers=workers, logger=logger)
    for repeat in range(spec.repeats):
        jobs.add_job(f"probe repeat {repeat}", _probe_once, embeddings, labels, num_classes, spec, probe, repeat)
    accuracies = [float(a) for a in jobs.run()]
    for repeat, acc in enumerate(accuracies):
        logger.debug(f"Probe repeat {repeat}: accuracy {acc:.4f}")

    report = EvalReport(accuracy_mean=float(np.mean(accuracies)), accuracy_std=float(np.std(accuracies)),
                        accuracies=accuracies)
    logger.info(f"Linear probe: {report.accuracy_mean:.4f} +- {report.accuracy_std:.4f} over {spec.repeats} splits")
    return report


def _kmeans_once(embeddings, k, cfg: ClusterConfig, run):
    seed = int(np.random.SeedSequence([cfg.seed, run]).generate_state(1)[0])
    model = KMeans(n_clusters=k, init="k-means++", n_init=1, max_iter=cfg.max_iter, tol=cfg.tol,
                   random_state=seed, algorithm="lloyd")
    return model.fit_predict(embeddings)


def kmeans(embeddings, k, runs=5, seed=0, max_iter=300, tol=1e-4, workers=1, logger=None):
    """Independent k-means++ / Lloyd runs; returns one assignment array per run"""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if not 1 <= k <= embeddings.shape[0]:
        raise EvaluationError(f"k={k} must lie in [1, {embeddings.shape[0]}]")
    cfg = ClusterConfig(runs=runs, max_iter=max_iter, tol=tol, seed=seed)
    jobs = QueueManager(workers=workers, logger=logger)
    for run in range(runs):
        jobs.add_job(f"kmeans run {run}", _kmeans_once, embeddings, k, cfg, run)
    return jobs.run()


def _check_lengths(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise EvaluationError(f"Partitions must be 1-D of equal length, got {a.shape} and {b.shape}")
    return a, b


def nmi(a, b):
    """Normalized mutual information with the geometric-mean normalisation"""
    a, b = _check_lengths(a, b)
    return float(normalized_mutual_info_score(a, b, average_method="geometric"))


def ari(a, b):
    """Adjusted Rand index"""
    a, b = _check_lengths(a, b)
    return float(adjusted_rand_score(a, b))


def cluster_report(embeddings, labels, k=None, cfg: ClusterConfig = ClusterConfig(), workers=1,
                   logger=None) -> EvalReport:
    """k-means on the embeddings scored against the labels"""
    logger = logger or logging.getLogger('SEHSSL')
    if labels is None:
        raise EvaluationError("Clustering evaluation needs node labels")
    labels = np.asarray(labels, dtype=np.int64)
    k = k or int(np.unique(labels).size)
    assignments = kmeans(embeddings, k, runs=cfg.runs, seed=cfg.seed, max_iter=cfg.max_iter, tol=cfg.tol,
                         workers=workers, logger=logger)
    nmis = [nmi(labels, a) for a in assignments]
    aris = [ari(labels, a) for a in assignments]
    report = EvalReport(nmi_mean=float(np.mean(nmis)), ari_mean=float(np.mean(aris)), nmi_runs=nmis, ari_runs=aris)
    logger.info(f"k-means (k={k}, {cfg.runs} runs): NMI {report.nmi_mean:.4f}, ARI {report.ari_mean:.4f}")
    return report
