"""Example-based precision/recall/F1 with exact or hierarchy-relaxed matching."""

from dataclasses import dataclass

from .corpus import EMPTY_HIERARCHY


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    f1: float
    p: int                  # number of evaluated instances
    matching: str           # "exact" | "hierarchical"
    per_example: tuple = None

    def to_dict(self, include_per_example=False):
        out = {"precision": self.precision, "recall": self.recall,
               "f1": self.f1, "p": self.p, "matching": self.matching}
        if include_per_example and self.per_example is not None:
            out["per_example"] = [list(t) for t in self.per_example]
        return out


def exact_intersection(gold, pred):
    """True-positive counts under identical-label matching."""
    tp = len(set(gold) & set(pred))
    return tp, tp


def hierarchical_intersection(gold, pred, hierarchy):
    """Relaxed true positives: a label matches any gold/predicted label that is
    its ancestor, descendant, or itself. Each label counts at most once."""
    gold, pred = set(gold), set(pred)
    tp_precision = sum(1 for q in pred if any(hierarchy.related(q, g) for g in gold))
    tp_recall = sum(1 for g in gold if any(hierarchy.related(q, g) for q in pred))
    return tp_precision, tp_recall


def _example_pr(gold, pred, matching, hierarchy):
    if matching == "exact":
        tp_p, tp_r = exact_intersection(gold, pred)
    elif matching == "hierarchical":
        tp_p, tp_r = hierarchical_intersection(gold, pred, hierarchy)
    else:
        raise ValueError(f"unknown matching mode {matching!r}")
    # Empty-set conventions: both empty counts as a perfect example; an empty
    # side against a non-empty one scores 0 for that component.
    if pred:
        precision = tp_p / len(pred)
    else:
        precision = 1.0 if not gold else 0.0
    if gold:
        recall = tp_r / len(gold)
    else:
        recall = 1.0 if not pred else 0.0
    return precision, recall


def f1_from_pr(precision, recall):
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def example_based_metrics(gold_sets, pred_sets, matching="exact", hierarchy=None,
                          keep_per_example=False):
    """Macro-average per-example precision and recall; F1 from the averages."""
    if len(gold_sets) != len(pred_sets):
        raise ValueError(
            f"gold/pred length mismatch: {len(gold_sets)} vs {len(pred_sets)}")
    if not gold_sets:
        raise ValueError("need at least one example")
    if matching == "hierarchical" and hierarchy is None:
        hierarchy = EMPTY_HIERARCHY
    per_example = []
    p_sum = r_sum = 0.0
    for gold, pred in zip(gold_sets, pred_sets):
        prec, rec = _example_pr(set(gold), set(pred), matching, hierarchy)
        p_sum += prec
        r_sum += rec
        if keep_per_example:
            per_example.append((prec, rec, f1_from_pr(prec, rec)))
    p = len(gold_sets)
    precision, recall = p_sum / p, r_sum / p
    return MetricsReport(
        precision=precision, recall=recall, f1=f1_from_pr(precision, recall),
        p=p, matching=matching,
        per_example=tuple(per_example) if keep_per_example else None)
