import numpy as np
import pytest

from mlnet.corpus import Document
from mlnet.errors import DataError, DegenerateInputError
from mlnet.preprocess import (
    EmbeddingTable,
    embed_document,
    load_embeddings,
    remove_stopwords,
    split_sentences,
    tokenize,
    tokenize_document,
)


class TestSplitSentences:
    def test_terminal_punctuation(self):
        assert split_sentences("A b. C d.") == ["A b.", "C d."]

    def test_no_terminator(self):
        assert split_sentences("No terminator") == ["No terminator"]

    def test_newline_boundary(self):
        assert split_sentences("x.\ny.") == ["x.", "y."]

    def test_empty_text(self):
        assert split_sentences("") == []

    def test_question_and_exclamation(self):
        assert split_sentences("Really? Yes! Ok.") == ["Really?", "Yes!", "Ok."]


class TestTokenize:
    def test_trailing_punctuation_split(self):
        assert tokenize("Cancer cells proliferate.") == ["cancer", "cells", "proliferate", "."]

    def test_empty(self):
        assert tokenize("") == []

    def test_internal_hyphen_preserved(self):
        assert tokenize("p53-mediated") == ["p53-mediated"]

    def test_surrounding_punctuation(self):
        assert tokenize("(p53)") == ["(", "p53", ")"]


class TestRemoveStopwords:
    def test_filter(self):
        assert remove_stopwords(["the", "cell"], {"the"}) == ["cell"]

    def test_empty(self):
        assert remove_stopwords([], {"the"}) == []

    def test_empty_stoplist_is_identity(self):
        assert remove_stopwords(["the", "cell"], set()) == ["the", "cell"]


class TestLoadEmbeddings:
    def test_basic(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("a 1 0\nb 0 1\n", encoding="utf-8")
        table = load_embeddings(path)
        assert table.dim == 2
        assert len(table.vectors) == 2
        assert np.array_equal(table.lookup("a"), [1.0, 0.0])

    def test_header_skipped(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("2 2\na 1 0\nb 0 1\n", encoding="utf-8")
        assert load_embeddings(path).dim == 2

    def test_inconsistent_length(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("a 1 0\nb 0 1 2\n", encoding="utf-8")
        with pytest.raises(DataError, match=":2:"):
            load_embeddings(path)

    def test_non_numeric(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("a 1 zzz\n", encoding="utf-8")
        with pytest.raises(DataError, match="non-numeric"):
            load_embeddings(path)

    def test_oov_is_zero_vector(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("a 1 0\n", encoding="utf-8")
        assert np.array_equal(load_embeddings(path).lookup("zzz"), [0.0, 0.0])


def table2d():
    return EmbeddingTable(dim=2, vectors={"alpha": np.array([1.0, 2.0]),
                                          "beta": np.array([3.0, 4.0])})


class TestEmbedDocument:
    def test_padding_and_masks(self):
        doc = tokenize_document(Document("d", "alpha beta", set()), stoplist=set())
        out = embed_document(doc, table2d(), s_max=2, t_max=4)
        assert out.tensor.shape == (2, 4, 2)
        assert np.array_equal(out.tensor[0, 0], [1.0, 2.0])
        assert np.array_equal(out.tensor[0, 1], [3.0, 4.0])
        assert np.array_equal(out.token_mask[0], [True, True, False, False])
        assert np.array_equal(out.sentence_mask, [True, False])
        assert not out.tensor[0, 2:].any()
        assert not out.tensor[1].any()

    def test_oov_token_masked_in_with_zero_vector(self):
        doc = tokenize_document(Document("d", "alpha unknowntoken", set()), stoplist=set())
        out = embed_document(doc, table2d(), s_max=1, t_max=2)
        assert out.token_mask[0, 1]
        assert not out.tensor[0, 1].any()

    def test_sentence_truncation(self):
        doc = tokenize_document(Document("d", "alpha. beta. alpha.", set()), stoplist=set())
        out = embed_document(doc, table2d(), s_max=2, t_max=4)
        assert out.sentence_mask.sum() == 2

    def test_token_truncation_count(self):
        doc = tokenize_document(Document("d", "alpha beta alpha beta alpha", set()),
                                stoplist=set())
        out = embed_document(doc, table2d(), s_max=1, t_max=3)
        assert out.token_mask[0].sum() == 3

    def test_degenerate_document(self):
        doc = tokenize_document(Document("d", "the the", set()), stoplist={"the"})
        assert doc.degenerate
        with pytest.raises(DegenerateInputError):
            embed_document(doc, table2d(), s_max=2, t_max=2)

    def test_pipeline_determinism(self):
        doc = Document("d", "Alpha beta. Beta alpha!", set())
        a = embed_document(tokenize_document(doc, set()), table2d(), 3, 5)
        b = embed_document(tokenize_document(doc, set()), table2d(), 3, 5)
        assert np.array_equal(a.tensor, b.tensor)
        assert np.array_equal(a.token_mask, b.token_mask)
