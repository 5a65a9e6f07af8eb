"""Command-line interface: prepare, train, predict, evaluate,
threshold-search, and grad-check subcommands."""

import argparse
import concurrent.futures
import hashlib
import json
import os
import sys

import numpy as np

from .artifact import load_model, save_model
from .config import resolve_config
from .corpus import (
    Document,
    LabelHierarchy,
    augment_labels,
    build_vocabulary,
    load_corpus,
    load_hierarchy,
    save_corpus,
    split_corpus,
)
from .encoder import EncoderParams
from .errors import DataError, MLNetError, NumericError
from .heads import predict_count_distribution
from .inference import (
    GlobalThreshold,
    decode_threshold,
    decode_topk,
    score_document,
    search_threshold,
)
from .metrics import example_based_metrics
from .preprocess import EncoderInput, load_embeddings
from .stopwords import load_stopwords
from .trainer import ModelBundle, TrainConfig, gradient_check, prepare_items, train_stage1, train_stage2

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
SPLIT_NAMES = ("train", "validation", "test")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class UsageError(MLNetError):
    pass


def _sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _threads():
    try:
        return max(1, int(os.environ.get("MLNET_THREADS", "1")))
    except ValueError:
        return 1


def _write_json(path, obj):
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_splits(splits_dir):
    out = {}
    for name in SPLIT_NAMES:
        path = os.path.join(splits_dir, f"{name}.jsonl")
        if not os.path.exists(path):
            raise DataError(f"missing split file {path}")
        out[name] = load_corpus(path)
    return out


def _stoplist(args):
    return load_stopwords(args.stoplist) if getattr(args, "stoplist", None) else None


def _index_hierarchy(hierarchy, vocab):
    """Re-key a label hierarchy into vocabulary index space."""
    parent_of = {}
    for child, parent in hierarchy.parent_of.items():
        if child in vocab.index and parent in vocab.index:
            parent_of[vocab.index[child]] = vocab.index[parent]
    return LabelHierarchy(parent_of=parent_of)


def _gold_index_sets(docs, vocab):
    """Gold label sets in index space; labels outside the vocabulary get fresh
    negative ids so they still count against recall without ever matching."""
    out = []
    next_unknown = -1
    unknown_ids = {}
    for doc in docs:
        idx = set()
        for lab in doc.gold_labels:
            if lab in vocab.index:
                idx.add(vocab.index[lab])
            else:
                if lab not in unknown_ids:
                    unknown_ids[lab] = next_unknown
                    next_unknown -= 1
                idx.add(unknown_ids[lab])
        out.append(idx)
    return out


# --- subcommands ------------------------------------------------------------

def cmd_prepare(args):
    cfg = resolve_config(args.task, args.config, {"seed": args.seed})
    docs = load_corpus(args.corpus)
    hierarchy_digest = None
    if args.hierarchy:
        hierarchy = load_hierarchy(args.hierarchy)
        hierarchy_digest = _sha256_file(args.hierarchy)
        docs = [Document(d.id, d.text, frozenset(augment_labels(d.gold_labels, hierarchy)))
                for d in docs]
    split = split_corpus(docs, cfg["split_ratios"], cfg["seed"])
    os.makedirs(args.out, exist_ok=True)
    manifest = {"seed": cfg["seed"], "ratios": list(cfg["split_ratios"]),
                "augmented": args.hierarchy is not None,
                "hierarchy_sha256": hierarchy_digest, "splits": {}}
    for name, part in zip(SPLIT_NAMES, (split.train, split.validation, split.test)):
        path = os.path.join(args.out, f"{name}.jsonl")
        save_corpus(part, path)
        manifest["splits"][name] = {"size": len(part), "sha256": _sha256_file(path)}
    _write_json(os.path.join(args.out, "manifest.json"), manifest)
    return EXIT_OK


def cmd_train(args):
    cfg = resolve_config(args.task, args.config, {
        "seed": args.seed, "stage1_epochs": args.stage1_epochs,
        "batch_size": args.batch_size, "learning_rate": args.learning_rate,
    })
    splits = _load_splits(args.splits)
    vocab = build_vocabulary(splits["train"] + splits["validation"] + splits["test"])
    table = load_embeddings(args.embeddings)
    if table.dim != cfg["embed_dim"]:
        raise DataError(
            f"embedding dim {table.dim} does not match configured {cfg['embed_dim']}")
    rng = np.random.default_rng(cfg["seed"])
    bundle = ModelBundle.init(
        rng, vocab, embed_dim=table.dim, word_hidden=cfg["word_hidden"],
        sent_hidden=cfg["sent_hidden"], att_dim=cfg["att_dim"],
        dropout_rate=cfg["dropout_rate"], mlp_dims=cfg["mlp_dims"], n=cfg["n"],
        s_max=cfg["s_max"], t_max=cfg["t_max"],
        lsep_on_preactivation=cfg["lsep_on_preactivation"],
        lsep_exact_cutoff=cfg["lsep_exact_cutoff"],
        lsep_sample_size=cfg["lsep_sample_size"])
    train_cfg = TrainConfig(
        learning_rate=cfg["learning_rate"], stage1_epochs=cfg["stage1_epochs"],
        batch_size=cfg["batch_size"], early_stop_patience=cfg["early_stop_patience"],
        stage2_max_epochs=cfg["stage2_max_epochs"], seed=cfg["seed"])
    stoplist = _stoplist(args)
    train_items, skipped = prepare_items(splits["train"], bundle, table, stoplist)
    val_items, _ = prepare_items(splits["validation"], bundle, table, stoplist)
    if skipped:
        print(f"skipped {len(skipped)} degenerate documents", file=sys.stderr)
    log = train_stage1(train_items, val_items, bundle, train_cfg)
    if not args.skip_stage2:
        train_stage2(train_items, val_items, bundle, train_cfg, log=log)
    log_path = args.log or args.out + ".log"
    with open(log_path, "w", encoding="utf-8") as fh:
        for stage, epoch, train_loss, val_loss in log:
            fh.write(f"{stage}\t{epoch}\t{train_loss:.10g}\t{val_loss:.10g}\n")
    snapshot = {k: (list(v) if isinstance(v, tuple) else v) for k, v in cfg.items()}
    save_model(args.out, bundle, extra_meta={
        "seed": cfg["seed"], "task": args.task, "config": snapshot,
        "embeddings_sha256": _sha256_file(args.embeddings)})
    return EXIT_OK


def _load_threshold(args):
    if args.threshold is not None:
        return GlobalThreshold(value=args.threshold, source_split="cli",
                               achieved_f1=float("nan"))
    if args.threshold_file:
        with open(args.threshold_file, encoding="utf-8") as fh:
            rec = json.load(fh)
        return GlobalThreshold(value=float(rec["value"]),
                               source_split=rec.get("source_split", "unknown"),
                               achieved_f1=float(rec.get("achieved_f1", float("nan"))))
    raise UsageError("threshold mode requires --threshold or --threshold-file")


def cmd_predict(args):
    bundle, _ = load_model(args.model)
    table = load_embeddings(args.embeddings)
    if table.dim != bundle.embed_dim:
        raise DataError(
            f"embedding dim {table.dim} does not match model ({bundle.embed_dim})")
    docs = load_corpus(args.input)
    threshold = _load_threshold(args) if args.mode == "threshold" else None
    if args.mode == "topk" and not bundle.count_head_trained:
        raise DataError("model artifact has an untrained count head; "
                        "topk decoding is unavailable (was --skip-stage2 used?)")
    stoplist = _stoplist(args)
    labels = bundle.vocab.labels

    def one(doc):
        scores, dv = score_document(doc, bundle, table, stoplist)
        if args.mode == "topk":
            pred = decode_topk(scores, predict_count_distribution(dv, bundle.count_head))
        else:
            pred = decode_threshold(scores, threshold)
        return {"id": doc.id,
                "labels": sorted(labels[i] for i in pred.labels),
                "scores": {labels[i]: float(s) for i, s in enumerate(scores)},
                "mode": args.mode}

    threads = _threads()
    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(one, docs))
    else:
        records = [one(doc) for doc in docs]
    with open(args.out, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_evaluate(args):
    if args.matching == "hierarchical" and not args.hierarchy:
        raise UsageError("--matching hierarchical requires --hierarchy")
    gold_docs = load_corpus(args.gold)
    preds = {}
    with open(args.predictions, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                preds[rec["id"]] = set(rec["labels"])
            except (json.JSONDecodeError, KeyError) as exc:
                raise DataError(f"{args.predictions}:{lineno}: bad prediction record") from exc
    gold_ids = [d.id for d in gold_docs]
    missing = sorted(set(gold_ids) - set(preds))
    extra = sorted(set(preds) - set(gold_ids))
    if missing or extra:
        raise DataError(f"id mismatch between files: missing={missing} extra={extra}")
    hierarchy = load_hierarchy(args.hierarchy) if args.hierarchy else None
    report = example_based_metrics(
        [d.gold_labels for d in gold_docs], [preds[d.id] for d in gold_docs],
        matching=args.matching, hierarchy=hierarchy,
        keep_per_example=args.per_example)
    _write_json(args.out, report.to_dict(include_per_example=args.per_example))
    return EXIT_OK


def cmd_threshold_search(args):
    bundle, _ = load_model(args.model)
    table = load_embeddings(args.embeddings)
    docs = _load_splits(args.splits)[args.split]
    stoplist = _stoplist(args)
    score_sets = [score_document(doc, bundle, table, stoplist)[0] for doc in docs]
    gold_sets = _gold_index_sets(docs, bundle.vocab)
    hierarchy = None
    if args.hierarchy:
        hierarchy = _index_hierarchy(load_hierarchy(args.hierarchy), bundle.vocab)
    result = search_threshold(score_sets, gold_sets, hierarchy=hierarchy,
                              source_split=args.split)
    _write_json(args.out, {"value": result.value, "achieved_f1": result.achieved_f1,
                           "source_split": result.source_split})
    return EXIT_OK


def _grad_check_fixture(seed=7):
    rng = np.random.default_rng(seed)
    from .corpus import LabelVocabulary
    vocab = LabelVocabulary(("l0", "l1", "l2", "l3"))
    bundle = ModelBundle.init(rng, vocab, embed_dim=5, word_hidden=3, sent_hidden=3,
                              att_dim=3, dropout_rate=0.0, mlp_dims=(8,), n=3,
                              s_max=2, t_max=4)
    # keep label pre-activations clear of the ReLU kink so central differences
    # with h=1e-4 measure the same branch the analytic gradient uses
    bundle.label_head.bias[:] = rng.uniform(0.2, 0.5, size=len(vocab))
    items = []
    for gold in ({0, 2}, {1}):
        tensor = rng.normal(size=(2, 4, 5))
        token_mask = np.array([[1, 1, 1, 0], [1, 1, 0, 0]], dtype=bool)
        tensor[~token_mask] = 0.0
        enc_input = EncoderInput(tensor=tensor,
                                 sentence_mask=np.array([True, True]),
                                 token_mask=token_mask)
        items.append((enc_input, frozenset(gold), len(gold)))
    return bundle, items


def cmd_grad_check(args):
    bundle, items = _grad_check_fixture()
    report = gradient_check(bundle, items, tolerance=args.tolerance)
    for name in sorted(report["groups"]):
        print(f"{name}\t{report['groups'][name]:.3e}")
    status = "PASS" if report["passed"] else "FAIL"
    print(f"{status}\tmax_rel_err={report['max_rel_err']:.3e}\t"
          f"tolerance={args.tolerance:g}")
    return EXIT_OK if report["passed"] else EXIT_NUMERIC


# --- argument parsing ---------------------------------------------------------

def _add_common(sub):
    sub.add_argument("--config", help="flat key=value config file")
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--task", choices=("task1", "task2", "task3", "custom"),
                     default="custom")


def build_parser():
    parser = _Parser(prog="mlnet", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("prepare", help="split a corpus into train/validation/test")
    _add_common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--hierarchy", help="child<TAB>parent file; enables label augmentation")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_prepare)

    p = subs.add_parser("train", help="two-stage training; writes a model artifact")
    _add_common(p)
    p.add_argument("--splits", required=True, help="directory from `mlnet prepare`")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--stoplist", help="stop-word override file")
    p.add_argument("--out", required=True, help="model artifact path")
    p.add_argument("--log", help="training log path (default: <out>.log)")
    p.add_argument("--stage1-epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=None)
    p.add_argument("--skip-stage2", action="store_true")
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("predict", help="decode label sets for a document file")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--stoplist")
    p.add_argument("--input", required=True, help="JSONL documents")
    p.add_argument("--out", required=True, help="JSONL predictions")
    p.add_argument("--mode", choices=("topk", "threshold"), default="topk")
    p.add_argument("--threshold", type=float)
    p.add_argument("--threshold-file", help="JSON from `mlnet threshold-search`")
    p.set_defaults(func=cmd_predict)

    p = subs.add_parser("evaluate", help="example-based precision/recall/F1")
    _add_common(p)
    p.add_argument("--predictions", required=True)
    p.add_argument("--gold", required=True, help="JSONL corpus with gold labels")
    p.add_argument("--matching", choices=("exact", "hierarchical"), default="exact")
    p.add_argument("--hierarchy")
    p.add_argument("--per-example", action="store_true")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_evaluate)

    p = subs.add_parser("threshold-search", help="global threshold maximizing F1")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--stoplist")
    p.add_argument("--splits", required=True)
    p.add_argument("--split", choices=SPLIT_NAMES, default="validation")
    p.add_argument("--hierarchy")
    p.add_argument("--out", help="write the JSON result here instead of stdout")
    p.set_defaults(func=cmd_threshold_search)

    p = subs.add_parser("grad-check", help="finite-difference check of the backward pass")
    _add_common(p)
    p.add_argument("--tolerance", type=float, default=1e-3)
    p.set_defaults(func=cmd_grad_check)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mlnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError) as exc:
        print(f"mlnet: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"mlnet: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, MLNetError) as exc:
        print(f"mlnet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
