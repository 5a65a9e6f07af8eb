"""Decoding: count-driven top-K, global thresholding, and threshold search."""

from dataclasses import dataclass

import numpy as np

from .encoder import encode_document
from .errors import MLNetError
from .heads import predict_count_distribution, score_labels
from .metrics import example_based_metrics
from .preprocess import embed_document, tokenize_document


@dataclass(frozen=True)
class PredictedLabelSet:
    labels: frozenset      # label indices
    decode_mode: str       # "topk" | "threshold"


@dataclass(frozen=True)
class GlobalThreshold:
    value: float
    source_split: str
    achieved_f1: float


def rank_labels(scores):
    """Indices by descending score; ties broken by ascending label index."""
    scores = np.asarray(scores)
    return np.lexsort((np.arange(len(scores)), -scores))


def decode_topk(scores, dist):
    """Top-K labels with K = argmax of the count distribution (tie: smaller K)."""
    k = int(np.argmax(dist)) + 1  # argmax returns the first (smallest) maximizer
    ranked = rank_labels(scores)
    return PredictedLabelSet(labels=frozenset(int(i) for i in ranked[:k]),
                             decode_mode="topk")


def decode_threshold(scores, threshold):
    """All labels whose scores are strictly above the threshold."""
    value = threshold.value if isinstance(threshold, GlobalThreshold) else threshold
    labels = frozenset(int(i) for i in np.flatnonzero(np.asarray(scores) > value))
    return PredictedLabelSet(labels=labels, decode_mode="threshold")


def threshold_candidates(score_sets):
    """Midpoints between consecutive distinct scores plus two sentinels."""
    values = np.unique(np.concatenate([np.asarray(s) for s in score_sets]))
    cands = [float(values[0]) - 1.0]
    cands.extend((float(values[i]) + float(values[i + 1])) / 2.0
                 for i in range(len(values) - 1))
    cands.append(float(values[-1]) + 1.0)
    return cands


def search_threshold(score_sets, gold_sets, hierarchy=None, source_split="validation"):
    """Global threshold maximizing example-based F1 (ties -> smaller value)."""
    if not score_sets or len(score_sets) != len(gold_sets):
        raise ValueError("score_sets and gold_sets must be equal-length and non-empty")
    matching = "hierarchical" if hierarchy is not None else "exact"
    best_value, best_f1 = None, -1.0
    for cand in threshold_candidates(score_sets):
        preds = [decode_threshold(s, cand).labels for s in score_sets]
        report = example_based_metrics(gold_sets, preds, matching=matching,
                                       hierarchy=hierarchy)
        if report.f1 > best_f1:
            best_value, best_f1 = cand, report.f1
    return GlobalThreshold(value=best_value, source_split=source_split,
                           achieved_f1=best_f1)


def score_document(doc, bundle, table, stoplist=None):
    """Preprocess -> encode (eval) -> per-label scores for one Document."""
    from .stopwords import DEFAULT_STOPWORDS
    tok = tokenize_document(doc, DEFAULT_STOPWORDS if stoplist is None else stoplist)
    enc_input = embed_document(tok, table, bundle.s_max, bundle.t_max)
    dv = encode_document(enc_input, bundle.encoder, mode="eval")
    return score_labels(dv, bundle.label_head), dv


def predict(doc, bundle, table, mode="topk", threshold=None, stoplist=None):
    """End-to-end prediction; returns (PredictedLabelSet, scores)."""
    scores, dv = score_document(doc, bundle, table, stoplist)
    if mode == "topk":
        if not bundle.count_head_trained:
            raise MLNetError("count head is untrained; topk decoding unavailable")
        dist = predict_count_distribution(dv, bundle.count_head)
        return decode_topk(scores, dist), scores
    if mode == "threshold":
        if threshold is None:
            raise ValueError("threshold mode requires a threshold")
        return decode_threshold(scores, threshold), scores
    raise ValueError(f"unknown decode mode {mode!r}")
