import logging
from dataclasses import dataclass, replace

import numpy as np

from encoder import embed
from evaluation import ClusterConfig, EvalReport, ProbeConfig, SplitSpec, cluster_report, linear_probe
from exceptions import EvaluationError
from membership_index import build_index
from queue_manager import QueueManager
from trainer import ABLATIONS, Trainer, TrainConfig


@dataclass
class PipelineResult:
    params: object
    disc: object
    train_report: object
    eval_report: EvalReport
    node_embeddings: np.ndarray
    hyperedge_embeddings: np.ndarray


class Pipeline:
    """Train, embed and evaluate a hypergraph end to end"""

    def __init__(self, config: TrainConfig, split: SplitSpec = SplitSpec(), probe: ProbeConfig = ProbeConfig(),
                 cluster: ClusterConfig = ClusterConfig(), workers=1, logger=None):
        self.config = config.validate()
        self.split = split.validate()
        self.probe = probe
        self.cluster = cluster
        self.workers = workers
        self.logger = logger or logging.getLogger('SEHSSL')

    def run(self, h, index=None, with_clustering=False):
        """Train with the pipeline config, then probe (and optionally cluster) the node embeddings"""
        if h.labels is None:
            raise EvaluationError("Pipeline evaluation needs a labelled hypergraph")
        try:
            params, disc, train_report = Trainer(self.config, self.logger).train(h, index=index)
            nodes, hyperedges = embed(h, params)
            report = linear_probe(nodes, h.labels, self.split, self.probe, num_classes=h.num_classes,
                                  workers=self.workers, logger=self.logger)
            if with_clustering:
                report = report.merge(cluster_report(nodes, h.labels, k=h.num_classes, cfg=self.cluster,
                                                     workers=self.workers, logger=self.logger))
        except Exception as e:
            self.logger.error(f"Pipeline failed on {h!r}: {str(e)}")
            raise
        return PipelineResult(params, disc, train_report, report, nodes, hyperedges)

    def _ablation_cell(self, h, index, variant, seed):
        config = replace(self.config, ablation=variant, seed=seed)
        split = replace(self.split, seed=seed)
        cell = Pipeline(config, split, self.probe, self.cluster, workers=1, logger=self.logger)
        return cell.run(h, index=index).eval_report.accuracy_mean

    def run_ablation(self, h, seeds, variants=ABLATIONS):
        """Mean probe accuracy of each variant over paired seeds

        Returns:
            {variant: {"accuracies": [per-seed mean accuracy], "mean": float}}
        """
        index = build_index(h, self.config.hops, logger=self.logger)
        jobs = QueueManager(workers=self.workers, logger=self.logger)
        cells = [(variant, seed) for variant in variants for seed in seeds]
        for variant, seed in cells:
            jobs.add_job(f"ablation {variant} seed {seed}", self._ablation_cell, h, index, variant, seed)
        accuracies = jobs.run()

        results = {variant: {"accuracies": []} for variant in variants}
        for (variant, _), acc in zip(cells, accuracies):
            results[variant]["accuracies"].append(acc)
        for variant, entry in results.items():
            entry["mean"] = float(np.mean(entry["accuracies"]))
            self.logger.info(f"Ablation {variant}: mean accuracy {entry['mean']:.4f}")
        return results
