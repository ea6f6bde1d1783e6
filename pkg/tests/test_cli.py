import json
import os

import jsonschema
import numpy as np
import pytest

from checkpoint import load_checkpoint
from dataset_handler import load_embeddings, save_hypergraph
from encoder import embed
from hypergraph import Hypergraph
from main import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main

SCHEMAS = os.path.join(os.path.dirname(__file__), "..", "docs", "schemas")


@pytest.fixture
def toy_path(tmp_path, toy_hypergraph):
    return save_hypergraph(toy_hypergraph, str(tmp_path / "toy.json"))


@pytest.fixture
def labelled_path(tmp_path):
    rng = np.random.default_rng(2)
    labels = np.repeat([0, 1], 25)
    edges = [sorted(rng.choice(np.flatnonzero(labels == c), size=5, replace=False).tolist())
             for c in (0, 1) for _ in range(6)]
    features = np.eye(2)[labels] + rng.normal(scale=0.2, size=(50, 2))
    return save_hypergraph(Hypergraph(50, edges, features, labels=labels), str(tmp_path / "labelled.json"))


@pytest.fixture
def small_config_path(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps({"embedding_dim": 4, "samples": 2, "epochs": 2}), encoding="utf-8")
    return str(path)


def _run(capsys, argv):
    code = main(argv)
    return code, capsys.readouterr().out


def _assert_matches_schema(doc, name):
    with open(os.path.join(SCHEMAS, f"{name}.schema.json"), encoding="utf-8") as f:
        schema = json.load(f)
    jsonschema.Draft202012Validator.check_schema(schema)
    jsonschema.validate(doc, schema, cls=jsonschema.Draft202012Validator)


class TestUsage:

    def test_no_subcommand(self, capsys):
        assert main([]) == EXIT_USAGE

    def test_unknown_flag(self, toy_path):
        assert main(["hops", "--data", toy_path, "--node", "0", "--bogus"]) == EXIT_USAGE

    def test_missing_dataset(self, tmp_path):
        assert main(["hops", "--data", str(tmp_path / "absent.json"), "--node", "0"]) == EXIT_USAGE

    def test_unknown_config_key(self, tmp_path, toy_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"not_a_field": 1}', encoding="utf-8")
        code = main(["train", "--data", toy_path, "--config", str(bad), "--out-checkpoint", str(tmp_path / "m")])
        assert code == EXIT_USAGE


class TestTrainAndEmbed:

    def test_train_emits_report_and_checkpoint(self, capsys, tmp_path, toy_path, small_config_path):
        ckpt = str(tmp_path / "model.ckpt")
        code, out = _run(capsys, ["train", "--data", toy_path, "--config", small_config_path,
                                  "--out-checkpoint", ckpt, "--seed", "5"])
        assert code == EXIT_OK
        report = json.loads(out)
        assert [e["epoch"] for e in report["epochs"]] == [1, 2]
        _assert_matches_schema(report, "train_report")
        assert report["config"]["seed"] == 5
        checkpoint = load_checkpoint(ckpt)
        assert checkpoint.epochs_completed == 2
        assert checkpoint.rng_state["next_epoch"] == 3

    def test_fixed_seed_identical_checkpoints(self, capsys, tmp_path, toy_path, small_config_path):
        paths = [str(tmp_path / f"run{i}.ckpt") for i in range(2)]
        for path in paths:
            assert main(["train", "--data", toy_path, "--config", small_config_path,
                         "--out-checkpoint", path, "--seed", "2"]) == EXIT_OK
        with open(paths[0], "rb") as a, open(paths[1], "rb") as b:
            assert a.read() == b.read()

    def test_report_file(self, capsys, tmp_path, toy_path, small_config_path):
        report_path = str(tmp_path / "report.json")
        main(["train", "--data", toy_path, "--config", small_config_path,
              "--out-checkpoint", str(tmp_path / "m.ckpt"), "--report", report_path])
        with open(report_path, encoding="utf-8") as f:
            assert len(json.load(f)["epochs"]) == 2

    def test_embed_round_trip(self, capsys, tmp_path, toy_path, toy_hypergraph, small_config_path):
        ckpt = str(tmp_path / "model.ckpt")
        main(["train", "--data", toy_path, "--config", small_config_path, "--out-checkpoint", ckpt])
        out_dir = str(tmp_path / "emb")
        assert main(["embed", "--checkpoint", ckpt, "--data", toy_path, "--out", out_dir]) == EXIT_OK

        nodes, hyperedges = embed(toy_hypergraph, load_checkpoint(ckpt).encoder_params())
        np.testing.assert_array_equal(load_embeddings(os.path.join(out_dir, "nodes.csv")), nodes)
        np.testing.assert_array_equal(load_embeddings(os.path.join(out_dir, "hyperedges.csv")), hyperedges)
        assert nodes.shape[0] == toy_hypergraph.num_nodes

    def test_embed_incompatible_dataset(self, capsys, tmp_path, toy_path, labelled_path, small_config_path):
        ckpt = str(tmp_path / "model.ckpt")
        main(["train", "--data", toy_path, "--config", small_config_path, "--out-checkpoint", ckpt])
        code = main(["embed", "--checkpoint", ckpt, "--data", labelled_path, "--out", str(tmp_path / "e")])
        assert code == EXIT_RUNTIME


class TestEvaluate:

    @pytest.fixture
    def embeddings_path(self, tmp_path, capsys, labelled_path, small_config_path):
        ckpt = str(tmp_path / "model.ckpt")
        main(["train", "--data", labelled_path, "--config", small_config_path, "--out-checkpoint", ckpt])
        main(["embed", "--checkpoint", ckpt, "--data", labelled_path, "--out", str(tmp_path / "emb")])
        capsys.readouterr()
        return str(tmp_path / "emb" / "nodes.csv")

    def test_classify(self, capsys, labelled_path, embeddings_path):
        code, out = _run(capsys, ["evaluate", "--embeddings", embeddings_path, "--data", labelled_path,
                                  "--task", "classify", "--repeats", "3"])
        assert code == EXIT_OK
        report = json.loads(out)
        assert len(report["accuracies"]) == 3
        _assert_matches_schema(report, "eval_report")
        assert report["nmi_mean"] is None

    def test_cluster(self, capsys, labelled_path, embeddings_path):
        code, out = _run(capsys, ["evaluate", "--embeddings", embeddings_path, "--data", labelled_path,
                                  "--task", "cluster", "--repeats", "2"])
        assert code == EXIT_OK
        report = json.loads(out)
        assert len(report["nmi_runs"]) == 2
        _assert_matches_schema(report, "eval_report")
        assert report["accuracy_mean"] is None

    def test_unlabelled_dataset(self, capsys, tmp_path, toy_hypergraph, embeddings_path):
        unlabelled = Hypergraph(6, toy_hypergraph.edge_nodes, toy_hypergraph.features)
        path = save_hypergraph(unlabelled, str(tmp_path / "plain.json"))
        assert main(["evaluate", "--embeddings", embeddings_path, "--data", path]) == EXIT_RUNTIME


class TestHopsAndBench:

    def test_hops(self, capsys, toy_path):
        code, out = _run(capsys, ["hops", "--data", toy_path, "--node", "0", "--K", "1"])
        assert code == EXIT_OK
        assert json.loads(out) == {"node": 0, "K": 1, "sets": {"1": [0, 3], "2": [1, 2]}}
        _assert_matches_schema(json.loads(out), "hops")

    def test_hops_node_out_of_range(self, toy_path):
        assert main(["hops", "--data", toy_path, "--node", "6"]) == EXIT_USAGE

    @pytest.mark.parametrize("K,d", [(1, 1), (2, 3)])
    def test_bench_within_bound(self, capsys, toy_path, small_config_path, K, d):
        code, out = _run(capsys, ["bench", "--data", toy_path, "--config", small_config_path,
                                  "--K", str(K), "--d", str(d)])
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["bound"] == 6 * K * 2 * d
        assert 0 < doc["discriminator_calls"] <= doc["bound"]
        assert doc["all_pairs"] == 24
        assert "peak_rss_mb" in doc["system"]
        _assert_matches_schema(doc, "bench")

    def test_bench_without_membership_structure(self, capsys, tmp_path, small_config_path):
        h = Hypergraph(3, [[0, 1, 2]], np.ones((3, 2)))
        path = save_hypergraph(h, str(tmp_path / "one.json"))
        code, out = _run(capsys, ["bench", "--data", path, "--config", small_config_path])
        assert code == EXIT_OK
        assert json.loads(out)["discriminator_calls"] == 0

    def test_hops_for_every_k(self, capsys, tmp_path, hypergraph_factory):
        h = hypergraph_factory(np.random.default_rng(4), num_nodes=12, num_edges=8)
        path = save_hypergraph(h, str(tmp_path / "random.json"))
        for node in range(h.num_nodes):
            code, out = _run(capsys, ["hops", "--data", path, "--node", str(node), "--K", "2"])
            assert code == EXIT_OK
            doc = json.loads(out)
            assert sorted(doc["sets"]) == ["1", "2", "3"]
            _assert_matches_schema(doc, "hops")


class TestTooSmallToTrain:

    @pytest.fixture
    def single_edge_path(self, tmp_path):
        path = tmp_path / "pair.json"
        path.write_text(json.dumps({"num_nodes": 2, "features": [[1.0], [3.0]], "hyperedges": [[0, 1]]}),
                        encoding="utf-8")
        return str(path)

    def test_train_exits_with_dataset_error(self, capsys, tmp_path, single_edge_path, small_config_path):
        code = main(["train", "--data", single_edge_path, "--config", small_config_path,
                     "--out-checkpoint", str(tmp_path / "m.ckpt")])
        captured = capsys.readouterr()
        assert code == EXIT_USAGE
        assert captured.out == ""
        assert "at least 2 nodes and 2 hyperedges" in captured.err
        assert not (tmp_path / "m.ckpt").exists()
