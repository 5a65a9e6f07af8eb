"""Sentence splitting, tokenization, stop-word removal, and embedding lookup."""

import re
import string
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateInputError
from .stopwords import DEFAULT_STOPWORDS

_SENT_BOUNDARY = re.compile(r"(?<=[.!?])\s+")
_PUNCT = set(string.punctuation)


@dataclass(frozen=True)
class TokenizedDocument:
    doc_id: str
    sentences: tuple  # tuple of tuples of lowercased tokens, no empty sentences

    @property
    def degenerate(self):
        return len(self.sentences) == 0


@dataclass(frozen=True)
class EmbeddingTable:
    dim: int
    vectors: dict  # token -> np.ndarray[dim]

    def lookup(self, token):
        """Vector for a token; out-of-vocabulary tokens map to the zero vector."""
        vec = self.vectors.get(token)
        if vec is None:
            return np.zeros(self.dim)
        return vec


@dataclass(frozen=True)
class EncoderInput:
    tensor: np.ndarray        # [s_max, t_max, d], zeros at masked slots
    sentence_mask: np.ndarray  # bool [s_max]
    token_mask: np.ndarray     # bool [s_max, t_max]


def split_sentences(text):
    """Rule-based split on terminal punctuation + whitespace and on newlines."""
    out = []
    for line in text.split("\n"):
        for seg in _SENT_BOUNDARY.split(line):
            seg = seg.strip()
            if seg:
                out.append(seg)
    return out


def tokenize(sentence):
    """Whitespace split, peel leading/trailing punctuation, lowercase."""
    tokens = []
    for chunk in sentence.split():
        leading = []
        while chunk and chunk[0] in _PUNCT:
            leading.append(chunk[0])
            chunk = chunk[1:]
        trailing = []
        while chunk and chunk[-1] in _PUNCT:
            trailing.append(chunk[-1])
            chunk = chunk[:-1]
        tokens.extend(leading)
        if chunk:
            tokens.append(chunk.lower())
        tokens.extend(reversed(trailing))
    return tokens


def remove_stopwords(tokens, stoplist=DEFAULT_STOPWORDS):
    return [t for t in tokens if t not in stoplist]


def tokenize_document(doc, stoplist=DEFAULT_STOPWORDS):
    """Full text pipeline for one Document; empty sentences are dropped."""
    sents = []
    for sent in split_sentences(doc.text):
        toks = remove_stopwords(tokenize(sent), stoplist)
        if toks:
            sents.append(tuple(toks))
    return TokenizedDocument(doc_id=doc.id, sentences=tuple(sents))


def load_embeddings(path):
    """Load plain-text word vectors; an optional two-integer header is skipped."""
    vectors = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            parts = [p for p in parts if p]
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2:
                try:
                    int(parts[0]), int(parts[1])
                    continue  # header line
                except ValueError:
                    pass
            token, comps = parts[0], parts[1:]
            if dim is None:
                dim = len(comps)
                if dim == 0:
                    raise DataError(f"{path}:{lineno}: no vector components")
            elif len(comps) != dim:
                raise DataError(
                    f"{path}:{lineno}: expected {dim} components, got {len(comps)}"
                )
            try:
                vec = np.array([float(c) for c in comps])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric component") from exc
            vectors[token] = vec
    if dim is None:
        raise DataError(f"{path}: empty embedding file")
    return EmbeddingTable(dim=dim, vectors=vectors)


def embed_document(doc, table, s_max, t_max):
    """Pack a TokenizedDocument into a fixed-shape [s_max, t_max, d] tensor."""
    if s_max < 1 or t_max < 1:
        raise ValueError("s_max and t_max must be >= 1")
    if doc.degenerate:
        raise DegenerateInputError(f"document {doc.doc_id!r} has no sentences")
    tensor = np.zeros((s_max, t_max, table.dim))
    sentence_mask = np.zeros(s_max, dtype=bool)
    token_mask = np.zeros((s_max, t_max), dtype=bool)
    for s, tokens in enumerate(doc.sentences[:s_max]):
        sentence_mask[s] = True
        for t, tok in enumerate(tokens[:t_max]):
            tensor[s, t] = table.lookup(tok)
            token_mask[s, t] = True
    return EncoderInput(tensor=tensor, sentence_mask=sentence_mask, token_mask=token_mask)
