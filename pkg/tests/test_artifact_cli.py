import json
import os

import numpy as np
import pytest

from mlnet.artifact import load_model, save_model
from mlnet.cli import main
from mlnet.config import load_config_file, resolve_config
from mlnet.errors import DataError
from mlnet.trainer import ModelBundle, params_checksum

from conftest import make_synthetic_corpus, synthetic_vocabulary_tokens, toy_embeddings


def small_bundle(seed=0):
    from mlnet.corpus import LabelVocabulary
    rng = np.random.default_rng(seed)
    vocab = LabelVocabulary(("a", "b", "c"))
    return ModelBundle.init(rng, vocab, embed_dim=4, word_hidden=2, sent_hidden=2,
                            att_dim=2, dropout_rate=0.5, mlp_dims=(5,), n=2,
                            s_max=3, t_max=4)


class TestArtifact:
    def test_round_trip_parameters_and_meta(self, tmp_path):
        bundle = small_bundle()
        bundle.count_head_trained = True
        path = tmp_path / "m.mlnet"
        save_model(path, bundle, extra_meta={"seed": 42})
        loaded, meta = load_model(path)
        assert meta["seed"] == 42
        assert loaded.vocab.labels == ("a", "b", "c")
        assert loaded.count_head_trained
        assert params_checksum(loaded.named_parameters()) == \
            params_checksum(bundle.named_parameters())

    def test_save_load_save_byte_identical(self, tmp_path):
        bundle = small_bundle()
        p1, p2 = tmp_path / "m1", tmp_path / "m2"
        save_model(p1, bundle, extra_meta={"seed": 1})
        loaded, meta = load_model(p1)
        save_model(p2, loaded, extra_meta={"seed": meta["seed"]})
        assert p1.read_bytes() == p2.read_bytes()

    def test_checksum_verified_on_load(self, tmp_path):
        bundle = small_bundle()
        path = tmp_path / "m.mlnet"
        save_model(path, bundle)
        blob = bytearray(path.read_bytes())
        blob[-1] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(DataError, match="checksum"):
            load_model(path)

    def test_rejects_non_artifact(self, tmp_path):
        path = tmp_path / "junk"
        path.write_bytes(b"not a model")
        with pytest.raises(DataError):
            load_model(path)


class TestConfig:
    def test_presets(self):
        cfg1 = resolve_config("task1")
        assert (cfg1["n"], cfg1["mlp_dims"], cfg1["embed_dim"]) == (5, (128, 128, 64), 200)
        cfg3 = resolve_config("task3")
        assert (cfg3["n"], cfg3["mlp_dims"], cfg3["embed_dim"]) == (70, (7024, 7024, 128), 300)

    def test_precedence_flag_over_file_over_preset(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text("n = 9  # override preset\nseed = 4\n", encoding="utf-8")
        cfg = resolve_config("task1", str(cfg_file), {"seed": 7})
        assert cfg["n"] == 9          # file beats preset
        assert cfg["seed"] == 7       # flag beats file
        assert cfg["mlp_dims"] == (128, 128, 64)  # preset default survives

    def test_unknown_key_rejected(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text("bogus = 1\n", encoding="utf-8")
        with pytest.raises(DataError, match="bogus"):
            load_config_file(str(cfg_file))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A prepared corpus, embeddings file, config, and trained model."""
    root = tmp_path_factory.mktemp("cli")
    docs = make_synthetic_corpus(num_docs=60, seed=3)
    corpus_path = root / "corpus.jsonl"
    with open(corpus_path, "w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(json.dumps({"id": d.id, "text": d.text,
                                 "labels": sorted(d.gold_labels)}) + "\n")
    table = toy_embeddings(synthetic_vocabulary_tokens(), dim=16, seed=5)
    emb_path = root / "vectors.txt"
    with open(emb_path, "w", encoding="utf-8") as fh:
        for tok, vec in table.vectors.items():
            fh.write(tok + " " + " ".join(f"{v:.8f}" for v in vec) + "\n")
    cfg_path = root / "run.cfg"
    cfg_path.write_text(
        "embed_dim = 16\nword_hidden = 6\nsent_hidden = 6\natt_dim = 6\n"
        "dropout_rate = 0.2\nmlp_dims = 16\nn = 3\ns_max = 4\nt_max = 6\n"
        "stage1_epochs = 4\nstage2_max_epochs = 10\nbatch_size = 16\n"
        "learning_rate = 0.01\nseed = 6\n", encoding="utf-8")
    splits_dir = root / "splits"
    assert main(["prepare", "--corpus", str(corpus_path), "--out", str(splits_dir),
                 "--config", str(cfg_path)]) == 0
    model_path = root / "model.mlnet"
    assert main(["train", "--splits", str(splits_dir), "--embeddings", str(emb_path),
                 "--out", str(model_path), "--config", str(cfg_path)]) == 0
    return {"root": root, "corpus": corpus_path, "embeddings": emb_path,
            "config": cfg_path, "splits": splits_dir, "model": model_path}


class TestCliPrepare:
    def test_split_files_and_manifest(self, workspace):
        splits = workspace["splits"]
        manifest = json.loads((splits / "manifest.json").read_text())
        assert manifest["splits"]["train"]["size"] == 42
        assert manifest["splits"]["validation"]["size"] == 6
        assert manifest["splits"]["test"]["size"] == 12
        for name in ("train", "validation", "test"):
            assert (splits / f"{name}.jsonl").exists()

    def test_rerun_is_idempotent(self, workspace, tmp_path):
        out2 = tmp_path / "splits2"
        assert main(["prepare", "--corpus", str(workspace["corpus"]), "--out", str(out2),
                     "--config", str(workspace["config"])]) == 0
        for name in ("train.jsonl", "validation.jsonl", "test.jsonl", "manifest.json"):
            assert (out2 / name).read_bytes() == (workspace["splits"] / name).read_bytes()

    def test_hierarchy_augmentation_closes_label_sets(self, tmp_path, workspace):
        h_path = tmp_path / "h.tsv"
        h_path.write_text("lab1\tlab0\nlab2\tlab1\n", encoding="utf-8")
        out = tmp_path / "splits_h"
        assert main(["prepare", "--corpus", str(workspace["corpus"]), "--out", str(out),
                     "--hierarchy", str(h_path), "--config", str(workspace["config"])]) == 0
        from mlnet.corpus import augment_labels, load_corpus, load_hierarchy
        h = load_hierarchy(h_path)
        for name in ("train", "validation", "test"):
            for doc in load_corpus(out / f"{name}.jsonl"):
                assert doc.gold_labels == augment_labels(doc.gold_labels, h)


class TestCliTrain:
    def test_artifact_reloads_with_matching_checksums(self, workspace):
        bundle, meta = load_model(workspace["model"])
        assert meta["count_head_trained"]
        assert len(bundle.vocab) == 8

    def test_log_has_expected_stage1_lines(self, workspace):
        lines = (workspace["root"] / "model.mlnet.log").read_text().splitlines()
        stage1 = [l for l in lines if l.startswith("stage1\t")]
        assert len(stage1) == 4
        for line in lines:
            stage, epoch, train_loss, val_loss = line.split("\t")
            float(train_loss), float(val_loss)

    def test_determinism_byte_identical_artifact(self, workspace, tmp_path):
        out2 = tmp_path / "model2.mlnet"
        assert main(["train", "--splits", str(workspace["splits"]),
                     "--embeddings", str(workspace["embeddings"]),
                     "--out", str(out2), "--config", str(workspace["config"])]) == 0
        assert out2.read_bytes() == workspace["model"].read_bytes()

    def test_skip_stage2_blocks_topk(self, workspace, tmp_path):
        out2 = tmp_path / "model_s1.mlnet"
        assert main(["train", "--splits", str(workspace["splits"]),
                     "--embeddings", str(workspace["embeddings"]),
                     "--out", str(out2), "--config", str(workspace["config"]),
                     "--skip-stage2"]) == 0
        _, meta = load_model(out2)
        assert not meta["count_head_trained"]
        pred_out = tmp_path / "p.jsonl"
        rc = main(["predict", "--model", str(out2),
                   "--embeddings", str(workspace["embeddings"]),
                   "--input", str(workspace["splits"] / "test.jsonl"),
                   "--out", str(pred_out), "--mode", "topk"])
        assert rc == 2


class TestCliPredictEvaluate:
    def test_topk_sizes_within_n(self, workspace, tmp_path):
        pred_out = tmp_path / "pred.jsonl"
        assert main(["predict", "--model", str(workspace["model"]),
                     "--embeddings", str(workspace["embeddings"]),
                     "--input", str(workspace["splits"] / "test.jsonl"),
                     "--out", str(pred_out), "--mode", "topk"]) == 0
        for line in pred_out.read_text().splitlines():
            rec = json.loads(line)
            assert 1 <= len(rec["labels"]) <= 3
            assert rec["mode"] == "topk"
            assert len(rec["scores"]) == 8

    def test_threshold_requires_value(self, workspace, tmp_path):
        rc = main(["predict", "--model", str(workspace["model"]),
                   "--embeddings", str(workspace["embeddings"]),
                   "--input", str(workspace["splits"] / "test.jsonl"),
                   "--out", str(tmp_path / "p.jsonl"), "--mode", "threshold"])
        assert rc == 1

    def test_evaluate_perfect_predictions(self, workspace, tmp_path):
        gold = workspace["splits"] / "test.jsonl"
        pred_path = tmp_path / "ideal.jsonl"
        with open(pred_path, "w", encoding="utf-8") as fh:
            for line in gold.read_text().splitlines():
                rec = json.loads(line)
                fh.write(json.dumps({"id": rec["id"], "labels": rec["labels"],
                                     "mode": "topk"}) + "\n")
        report_path = tmp_path / "report.json"
        assert main(["evaluate", "--predictions", str(pred_path), "--gold", str(gold),
                     "--out", str(report_path)]) == 0
        report = json.loads(report_path.read_text())
        assert report["precision"] == report["recall"] == report["f1"] == 1.0
        assert report["p"] == 12

    def test_evaluate_id_mismatch(self, workspace, tmp_path):
        pred_path = tmp_path / "bad.jsonl"
        pred_path.write_text('{"id":"nope","labels":[]}\n', encoding="utf-8")
        rc = main(["evaluate", "--predictions", str(pred_path),
                   "--gold", str(workspace["splits"] / "test.jsonl")])
        assert rc == 2

    def test_evaluate_hierarchical_needs_hierarchy(self, workspace, tmp_path):
        pred_path = tmp_path / "p.jsonl"
        pred_path.write_text("", encoding="utf-8")
        rc = main(["evaluate", "--predictions", str(pred_path),
                   "--gold", str(workspace["splits"] / "test.jsonl"),
                   "--matching", "hierarchical"])
        assert rc == 1

    def test_parallel_prediction_matches_serial(self, workspace, tmp_path):
        serial, parallel = tmp_path / "s.jsonl", tmp_path / "p.jsonl"
        args = ["predict", "--model", str(workspace["model"]),
                "--embeddings", str(workspace["embeddings"]),
                "--input", str(workspace["splits"] / "test.jsonl"), "--mode", "topk"]
        assert main(args + ["--out", str(serial)]) == 0
        os.environ["MLNET_THREADS"] = "4"
        try:
            assert main(args + ["--out", str(parallel)]) == 0
        finally:
            del os.environ["MLNET_THREADS"]
        assert serial.read_bytes() == parallel.read_bytes()


class TestCliThresholdSearch:
    def test_search_and_cross_check_with_evaluate(self, workspace, tmp_path):
        th_path = tmp_path / "threshold.json"
        assert main(["threshold-search", "--model", str(workspace["model"]),
                     "--embeddings", str(workspace["embeddings"]),
                     "--splits", str(workspace["splits"]),
                     "--split", "validation", "--out", str(th_path)]) == 0
        th = json.loads(th_path.read_text())
        assert th["source_split"] == "validation"
        pred_out = tmp_path / "pred_th.jsonl"
        assert main(["predict", "--model", str(workspace["model"]),
                     "--embeddings", str(workspace["embeddings"]),
                     "--input", str(workspace["splits"] / "validation.jsonl"),
                     "--out", str(pred_out), "--mode", "threshold",
                     "--threshold-file", str(th_path)]) == 0
        report_path = tmp_path / "report.json"
        assert main(["evaluate", "--predictions", str(pred_out),
                     "--gold", str(workspace["splits"] / "validation.jsonl"),
                     "--out", str(report_path)]) == 0
        report = json.loads(report_path.read_text())
        assert report["f1"] == pytest.approx(th["achieved_f1"], abs=1e-12)


class TestCliGradCheck:
    def test_passes(self, capsys):
        assert main(["grad-check"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out
        # every non-count parameter group is listed
        assert out.count("\n") >= 20

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as exc:
            main(["predict", "--model", "x"])  # missing required flags
        assert exc.value.code == 1


class TestExitCodes:
    def test_missing_corpus_is_data_error(self, tmp_path):
        rc = main(["prepare", "--corpus", str(tmp_path / "nope.jsonl"),
                   "--out", str(tmp_path / "o")])
        assert rc == 2
