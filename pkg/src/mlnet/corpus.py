"""Corpus ingestion, label vocabularies, dataset splits, and label hierarchies."""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    gold_labels: frozenset

    def __post_init__(self):
        object.__setattr__(self, "gold_labels", frozenset(self.gold_labels))


@dataclass(frozen=True)
class LabelVocabulary:
    labels: tuple
    index: dict = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "index", {lab: i for i, lab in enumerate(self.labels)})

    def __len__(self):
        return len(self.labels)

    def to_indices(self, labels):
        """Map label strings to indices, silently dropping unknown labels."""
        return {self.index[lab] for lab in labels if lab in self.index}


@dataclass(frozen=True)
class LabelHierarchy:
    parent_of: dict  # child label -> parent label; roots absent

    def parent(self, label):
        return self.parent_of.get(label)

    def ancestors(self, label):
        """All strict ancestors of ``label``, walking up to the root."""
        out = []
        seen = {label}
        cur = self.parent_of.get(label)
        while cur is not None:
            if cur in seen:
                raise DataError(f"cycle in hierarchy at label {cur!r}")
            seen.add(cur)
            out.append(cur)
            cur = self.parent_of.get(cur)
        return out

    def related(self, a, b):
        """True if a == b, or one is an ancestor of the other."""
        return a == b or a in self.ancestors(b) or b in self.ancestors(a)


EMPTY_HIERARCHY = LabelHierarchy(parent_of={})


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple
    validation: tuple
    test: tuple


def load_corpus(path, fmt="jsonl"):
    """Load a corpus file into a list of Documents, preserving file order."""
    if fmt != "jsonl":
        raise DataError(f"unknown corpus format {fmt!r}")
    docs = []
    seen_ids = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON: {exc.msg}") from exc
            for key, typ in (("id", str), ("text", str), ("labels", list)):
                if key not in rec or not isinstance(rec[key], typ):
                    raise DataError(f"{path}:{lineno}: missing or invalid key {key!r}")
            if rec["id"] in seen_ids:
                raise DataError(f"{path}:{lineno}: duplicate document id {rec['id']!r}")
            seen_ids.add(rec["id"])
            docs.append(Document(rec["id"], rec["text"], frozenset(rec["labels"])))
    return docs


def save_corpus(docs, path):
    """Write documents as JSONL (labels sorted for byte-stable output)."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            rec = {"id": doc.id, "text": doc.text, "labels": sorted(doc.gold_labels)}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def build_vocabulary(docs):
    """Lexicographically sorted union of all gold labels."""
    labels = set()
    for doc in docs:
        labels |= doc.gold_labels
    return LabelVocabulary(tuple(sorted(labels)))


def split_corpus(docs, ratios=(0.7, 0.1, 0.2), seed=0):
    """Seeded shuffle then floor/floor/remainder partition into train/val/test."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {ratios}")
    n = len(docs)
    if n < 3:
        raise DataError(f"need at least 3 documents to split, got {n}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_train = math.floor(ratios[0] * n)
    n_val = math.floor(ratios[1] * n)
    shuffled = [docs[i] for i in order]
    return DatasetSplit(
        train=tuple(shuffled[:n_train]),
        validation=tuple(shuffled[n_train:n_train + n_val]),
        test=tuple(shuffled[n_train + n_val:]),
    )


def load_hierarchy(path):
    """Load a child<TAB>parent edge list; verifies single parents and acyclicity."""
    parent_of = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise DataError(f"{path}:{lineno}: expected 'child<TAB>parent'")
            child, parent = parts
            if child in parent_of and parent_of[child] != parent:
                raise DataError(
                    f"{path}:{lineno}: label {child!r} has two distinct parents "
                    f"({parent_of[child]!r}, {parent!r})"
                )
            parent_of[child] = parent
    h = LabelHierarchy(parent_of=parent_of)
    for label in parent_of:
        h.ancestors(label)  # raises DataError on a cycle
    return h


def augment_labels(labels, hierarchy):
    """Ancestor-closure of a label set; labels unknown to the hierarchy pass through."""
    out = set(labels)
    for lab in labels:
        out.update(hierarchy.ancestors(lab))
    return out
