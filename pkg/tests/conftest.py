import numpy as np
import pytest

from mlnet.corpus import Document
from mlnet.preprocess import EmbeddingTable

FILLERS = [f"filler{i}" for i in range(20)]


def toy_embeddings(tokens, dim=8, seed=0):
    rng = np.random.default_rng(seed)
    return EmbeddingTable(dim=dim, vectors={t: rng.normal(size=dim) for t in tokens})


def make_synthetic_corpus(num_docs=500, num_labels=8, seed=13):
    """Documents whose labels are fully determined by keyword presence and
    whose label count (1..3) is announced by a count-marker sentence."""
    rng = np.random.default_rng(seed)
    docs = []
    for i in range(num_docs):
        count = int(rng.integers(1, 4))
        labels = rng.choice(num_labels, size=count, replace=False)
        sentences = [f"count{count} report."]
        for lab in labels:
            f1, f2 = rng.choice(len(FILLERS), size=2, replace=True)
            sentences.append(f"kw{lab} {FILLERS[f1]} {FILLERS[f2]}.")
        docs.append(Document(
            id=f"doc{i}",
            text=" ".join(sentences),
            gold_labels=frozenset(f"lab{lab}" for lab in labels)))
    return docs


def synthetic_vocabulary_tokens(num_labels=8):
    tokens = [f"kw{i}" for i in range(num_labels)]
    tokens += [f"count{c}" for c in (1, 2, 3)]
    tokens += ["report", "."]
    tokens += FILLERS
    return tokens


@pytest.fixture(scope="session")
def synthetic_corpus():
    return make_synthetic_corpus()


@pytest.fixture(scope="session")
def synthetic_table():
    return toy_embeddings(synthetic_vocabulary_tokens(), dim=16, seed=5)
