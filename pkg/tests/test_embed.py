import numpy as np
import pytest

from otopic.corpus import PreprocessConfig, RawCorpus, preprocess
from otopic.embed import (
    DocEmbeddings,
    embed_documents_lsa,
    embed_new_documents,
    embed_words_ppmi,
    load_embeddings,
    ppmi_matrix,
    tfidf_matrix,
    truncated_svd,
)
from otopic.errors import DimensionTooLarge, NonFiniteValue, RowCountMismatch


class TestTruncatedSvd:
    def test_matches_numpy_oracle(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((30, 12))
        u, s, v = truncated_svd(a, 5)
        s_ref = np.linalg.svd(a, compute_uv=False)[:5]
        assert s == pytest.approx(s_ref, rel=1e-10)
        assert np.allclose(u @ np.diag(s) @ v.T, a @ v @ v.T, atol=1e-10)

    def test_orthonormal_factors(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((20, 15))
        u, _, v = truncated_svd(a, 6)
        assert np.allclose(u.T @ u, np.eye(6), atol=1e-10)
        assert np.allclose(v.T @ v, np.eye(6), atol=1e-10)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((25, 10))
        u1, s1, v1 = truncated_svd(a, 4, seed=7)
        u2, s2, v2 = truncated_svd(a, 4, seed=7)
        assert np.array_equal(u1, u2)
        assert np.array_equal(s1, s2)
        assert np.array_equal(v1, v2)

    def test_sign_convention(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((18, 9))
        _, _, v = truncated_svd(a, 3)
        for j in range(3):
            assert v[np.argmax(np.abs(v[:, j])), j] >= 0

    def test_h_too_large_rejected(self):
        with pytest.raises(DimensionTooLarge):
            truncated_svd(np.zeros((4, 3)), 4)


class TestDocEmbeddings:
    def test_unit_rows(self, planted):
        corpus, doc_emb, _, _ = planted
        norms = np.linalg.norm(doc_emb.matrix, axis=1)
        assert np.allclose(norms, 1.0, atol=1e-9)
        assert doc_emb.matrix.shape == (corpus.n_docs, 64)

    def test_tfidf_values(self):
        raw = RawCorpus(texts=["dog dog cat", "dog bird", "cat bird"])
        c = preprocess(raw, PreprocessConfig(min_df=2, stopwords=frozenset()))
        df = np.asarray((c.bow > 0).sum(axis=0)).ravel()
        idf = np.log(c.n_docs / df)
        mat = tfidf_matrix(c.bow, idf).toarray()
        j = c.vocab.index("dog")
        assert mat[0, j] == pytest.approx(np.log1p(2) * np.log(3 / 2))

    def test_transform_reproduces_training_rows(self, planted):
        corpus, doc_emb, _, _ = planted
        again = embed_new_documents(corpus.bow, doc_emb)
        assert np.allclose(again, doc_emb.matrix, atol=1e-9)

    def test_transform_without_state_rejected(self):
        emb = DocEmbeddings(matrix=np.eye(2))
        with pytest.raises(NonFiniteValue):
            embed_new_documents(None, emb)

    def test_dim_exceeding_corpus_rejected(self):
        raw = RawCorpus(texts=["dog cat", "dog cat", "dog bird", "cat bird"])
        c = preprocess(raw, PreprocessConfig(min_df=2, stopwords=frozenset()))
        with pytest.raises(DimensionTooLarge):
            embed_documents_lsa(c, 10)


class TestWordEmbeddings:
    def test_ppmi_symmetric_nonnegative(self, planted):
        corpus, _, _, _ = planted
        mat = ppmi_matrix(corpus, window=10)
        assert (mat != mat.T).nnz == 0
        assert mat.data.min() > 0

    def test_ppmi_hand_value(self):
        raw = RawCorpus(texts=["dog cat", "dog cat", "bird fish", "bird fish"])
        c = preprocess(raw, PreprocessConfig(min_df=2, stopwords=frozenset()))
        mat = ppmi_matrix(c, window=2).toarray()
        i, j = c.vocab.index("cat"), c.vocab.index("dog")
        # 4 windows; cat in 2, dog in 2, together in 2: pmi = log(2*4/4) = log 2
        assert mat[i, j] == pytest.approx(np.log(2.0))
        i, j = c.vocab.index("bird"), c.vocab.index("dog")
        # never co-occur: clipped to zero
        assert mat[i, j] == 0.0

    def test_embedding_shape(self, planted):
        corpus, _, word_emb, _ = planted
        assert word_emb.matrix.shape == (corpus.vocab_size, 64)
        assert np.all(np.isfinite(word_emb.matrix))

    def test_dim_exceeding_vocab_rejected(self):
        raw = RawCorpus(texts=["dog cat", "dog cat", "dog bird", "cat bird"])
        c = preprocess(raw, PreprocessConfig(min_df=2, stopwords=frozenset()))
        with pytest.raises(DimensionTooLarge):
            embed_words_ppmi(c, 5)


class TestLoadEmbeddings:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(4)
        mat = rng.standard_normal((5, 3))
        path = tmp_path / "emb.csv"
        np.savetxt(path, mat, delimiter=",")
        doc = load_embeddings(str(path), 5, kind="doc")
        assert np.allclose(np.linalg.norm(doc.matrix, axis=1), 1.0)
        word = load_embeddings(str(path), 5, kind="word")
        assert np.allclose(word.matrix, mat)

    def test_row_count_mismatch(self, tmp_path):
        path = tmp_path / "emb.csv"
        path.write_text("1,2\n3,4\n")
        with pytest.raises(RowCountMismatch):
            load_embeddings(str(path), 3)

    def test_non_finite_rejected(self, tmp_path):
        path = tmp_path / "emb.csv"
        path.write_text("1,2\n3,nan\n")
        with pytest.raises(NonFiniteValue):
            load_embeddings(str(path), 2)
