import argparse
import json
import logging
import os
import sys
import time

from checkpoint import load_checkpoint, save_checkpoint
from config_manager import ConfigManager
from dataset_handler import load_embeddings, load_hypergraph, save_embeddings
from diffnum import Tape
from encoder import embed, encode
from evaluation import ClusterConfig, SplitSpec, cluster_report, linear_probe
from exceptions import ConfigError, DatasetError, EvaluationError, SEHSSLError, ShapeMismatchError
from logger import LoggerSetup
from membership_index import build_index
from objectives import hierarchical_membership_loss
from platform_utils import PlatformUtils
from trainer import Trainer

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def setup_exception_logging():
    """Setup global exception handler to log unhandled exceptions"""
    def handle_exception(exc_type, exc_value, exc_traceback):
        """Log unhandled exceptions"""
        if issubclass(exc_type, KeyboardInterrupt):
            # Let keyboard interrupts pass through
            sys.__excepthook__(exc_type, exc_value, exc_traceback)
            return
        logger = logging.getLogger('SEHSSL')
        logger.critical("Unhandled exception", exc_info=(exc_type, exc_value, exc_traceback))

    sys.excepthook = handle_exception


def emit(document, out_path=None):
    """Write a JSON document to stdout and optionally to a file"""
    text = json.dumps(document, indent=2, sort_keys=True, allow_nan=False)
    print(text)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as f:
            f.write(text + "\n")


def _resolve_config(args):
    overrides = {"seed": getattr(args, "seed", None), "epochs": getattr(args, "epochs", None)}
    if getattr(args, "K", None) is not None:
        overrides["hops"] = args.K
    if getattr(args, "d", None) is not None:
        overrides["samples"] = args.d
    return ConfigManager(profiles_dir=args.profiles_dir).resolve(
        config_file=args.config, profile=args.profile, overrides=overrides)


def cmd_train(args, logger):
    """Train on a dataset, write a checkpoint and print the TrainReport"""
    h = load_hypergraph(args.data, args.format, logger=logger)
    config = _resolve_config(args)
    params, disc, report = Trainer(config, logger).train(h)
    save_checkpoint(args.out_checkpoint, params, disc, config.to_dict(),
                    rng_state={"seed": config.seed, "next_epoch": config.epochs + 1},
                    epochs_completed=config.epochs, logger=logger)
    emit(report.to_dict(), args.report)
    return EXIT_OK


def cmd_embed(args, logger):
    """Encode the original hypergraph with a checkpoint and write node/hyperedge CSVs"""
    h = load_hypergraph(args.data, args.format, logger=logger)
    ckpt = load_checkpoint(args.checkpoint)
    params = ckpt.encoder_params(in_dim=h.num_features)
    nodes, hyperedges = embed(h, params)
    os.makedirs(args.out, exist_ok=True)
    save_embeddings(nodes, os.path.join(args.out, "nodes.csv"))
    save_embeddings(hyperedges, os.path.join(args.out, "hyperedges.csv"))
    logger.info(f"Wrote {nodes.shape[0]} node and {hyperedges.shape[0]} hyperedge embeddings to {args.out}")
    return EXIT_OK


def cmd_evaluate(args, logger):
    """Linear probe or k-means evaluation of saved node embeddings"""
    h = load_hypergraph(args.data, args.format, logger=logger)
    if h.labels is None:
        raise EvaluationError(f"{args.data} has no labels")
    embeddings = load_embeddings(args.embeddings)
    if embeddings.shape[0] != h.num_nodes:
        raise ShapeMismatchError(f"{embeddings.shape[0]} embedding rows for {h.num_nodes} nodes")
    if args.task == "classify":
        split = SplitSpec(repeats=args.repeats, seed=args.seed)
        report = linear_probe(embeddings, h.labels, split, num_classes=h.num_classes,
                              workers=args.workers, logger=logger)
    else:
        cfg = ClusterConfig(runs=args.repeats, seed=args.seed)
        report = cluster_report(embeddings, h.labels, k=h.num_classes, cfg=cfg, workers=args.workers,
                                logger=logger)
    emit(report.to_dict(), args.out)
    return EXIT_OK


def cmd_hops(args, logger):
    """Dump the k-hop membership sets of one node"""
    h = load_hypergraph(args.data, args.format, logger=logger)
    if not 0 <= args.node < h.num_nodes:
        raise DatasetError(f"Node {args.node} outside [0, {h.num_nodes})")
    index = build_index(h, args.K, logger=logger)
    emit({"node": args.node, "K": args.K, "sets": index.describe(args.node)})
    return EXIT_OK


def cmd_bench(args, logger):
    """Count discriminator evaluations of one membership pass against the |V| K 2d bound"""
    h = load_hypergraph(args.data, args.format, logger=logger)
    config = _resolve_config(args)
    trainer = Trainer(config, logger)

    started = time.perf_counter()
    index = build_index(h, config.hops, logger=logger)
    index_seconds = time.perf_counter() - started

    params, disc = trainer.initialize(h)
    tape = Tape(record=False)
    base = encode(h, params, tape)
    started = time.perf_counter()
    result = hierarchical_membership_loss(h, index, base.nodes, base.hyperedges, disc, config.loss_weights(),
                                          trainer.sampling_rng(1), tape)
    loss_seconds = time.perf_counter() - started

    bound = h.num_nodes * config.hops * 2 * config.samples
    if result.discriminator_calls > bound:
        raise SEHSSLError(f"{result.discriminator_calls} discriminator calls exceed the bound {bound}")
    emit({
        "num_nodes": h.num_nodes,
        "num_hyperedges": h.num_hyperedges,
        "K": config.hops,
        "d": config.samples,
        "discriminator_calls": result.discriminator_calls,
        "bound": bound,
        "all_pairs": h.num_nodes * h.num_hyperedges,
        "active_terms": result.active_terms,
        "index_build_seconds": index_seconds,
        "membership_loss_seconds": loss_seconds,
        "system": PlatformUtils.get_system_info(),
    })
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="sehssl", description="Self-supervised hypergraph representation learning")
    sub = parser.add_subparsers(dest="command", required=True)

    def data_args(p):
        p.add_argument("--data", required=True, help="dataset JSON file or two-file directory")
        p.add_argument("--format", choices=["json", "two-file"], default=None)

    def config_args(p):
        p.add_argument("--config", default=None, help="flat JSON config file")
        p.add_argument("--profile", default=None, help="named profile in --profiles-dir")
        p.add_argument("--profiles-dir", default="configs")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("train", help="train an encoder and write a checkpoint")
    data_args(p)
    config_args(p)
    p.add_argument("--out-checkpoint", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--report", default=None, help="also write the report JSON here")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("embed", help="write node and hyperedge embeddings as CSV")
    data_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=cmd_embed)

    p = sub.add_parser("evaluate", help="linear probe or clustering of node embeddings")
    data_args(p)
    p.add_argument("--embeddings", required=True, help="node embedding CSV")
    p.add_argument("--task", choices=["classify", "cluster"], default="classify")
    p.add_argument("--repeats", type=int, default=None, help="splits (classify, default 20) or runs (cluster, default 5)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("hops", help="dump the membership sets of one node as JSON")
    data_args(p)
    p.add_argument("--node", type=int, required=True)
    p.add_argument("--K", type=int, default=1)
    p.set_defaults(handler=cmd_hops)

    p = sub.add_parser("bench", help="count discriminator evaluations of one membership pass")
    data_args(p)
    config_args(p)
    p.add_argument("--K", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.set_defaults(handler=cmd_bench)
    return parser


def main(argv=None):
    """Main entry point; returns the process exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    setup_exception_logging()
    logger = LoggerSetup().get_logger()
    if args.command == "evaluate" and args.repeats is None:
        args.repeats = 20 if args.task == "classify" else 5
    if args.command == "hops" and args.K < 1:
        logger.error("--K must be >= 1")
        return EXIT_USAGE

    try:
        return args.handler(args, logger)
    except (DatasetError, ConfigError) as e:
        logger.error(str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (SEHSSLError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
