"""Document and word embedding providers.

The internal providers are TF-IDF + truncated SVD for documents and
PPMI + truncated SVD for words; both are deterministic given a seed.
Externally computed embeddings (e.g. from a transformer) can be loaded
from headerless CSV instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .cooccur import window_counts
from .corpus import Corpus
from .errors import DimensionTooLarge, NonFiniteValue, RowCountMismatch

SVD_SEED = 0
SVD_MAX_ITERS = 50
SVD_TOL = 1e-8

DEFAULT_EMBED_DIM = 64
DEFAULT_PPMI_WINDOW = 10


@dataclass
class DocEmbeddings:
    matrix: np.ndarray  # N x H, unit L2 rows
    # projection state kept so unseen documents can be embedded consistently
    idf: np.ndarray | None = None
    projection: np.ndarray | None = None  # V x H

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


@dataclass
class WordEmbeddings:
    matrix: np.ndarray  # V x H, row order = vocab order

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def truncated_svd(a, h: int, seed: int = SVD_SEED,
                  max_iters: int = SVD_MAX_ITERS, tol: float = SVD_TOL):
    """Top-h SVD by block power iteration on a^T a.

    Returns (U, s, V) with a ~= U @ diag(s) @ V.T. Deterministic: seeded
    start and a sign convention forcing the largest-magnitude entry of each
    right singular vector nonnegative.
    """
    m, n = a.shape
    if h > min(m, n):
        raise DimensionTooLarge(f"h={h} exceeds min(shape)={min(m, n)}")
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, h)))
    for _ in range(max_iters):
        z = a.T @ (a @ q)
        q_new, _ = np.linalg.qr(np.asarray(z))
        # subspace distance: ||QQ^T - Q'Q'^T||_F^2 = 2h - 2||Q^T Q'||_F^2
        overlap = np.linalg.norm(q.T @ q_new) ** 2
        q = q_new
        if math.sqrt(max(0.0, 2 * h - 2 * overlap)) < tol:
            break
    b = np.asarray(a @ q)  # m x h
    gram = b.T @ b
    eigvals, rot = np.linalg.eigh(gram)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    rot = rot[:, order]
    s = np.sqrt(eigvals)
    v = q @ rot
    u = b @ rot
    nonzero = s > 1e-300
    u[:, nonzero] /= s[nonzero]
    u[:, ~nonzero] = 0.0
    # sign convention per right singular vector
    for j in range(h):
        k = int(np.argmax(np.abs(v[:, j])))
        if v[k, j] < 0:
            v[:, j] = -v[:, j]
            u[:, j] = -u[:, j]
    return u, s, v


def _normalize_rows(mat: np.ndarray) -> np.ndarray:
    """L2-normalize rows; zero rows become the uniform direction."""
    norms = np.linalg.norm(mat, axis=1)
    out = np.empty_like(mat)
    zero = norms < 1e-300
    out[~zero] = mat[~zero] / norms[~zero, None]
    out[zero] = 1.0 / math.sqrt(mat.shape[1])
    return out


def tfidf_matrix(bow: sparse.csr_matrix, idf: np.ndarray) -> sparse.csr_matrix:
    """log(1 + tf) * idf, sparse."""
    mat = bow.tocsr().astype(np.float64)
    mat.data = np.log1p(mat.data)
    return mat.multiply(idf[None, :]).tocsr()


def embed_documents_lsa(c: Corpus, h: int = DEFAULT_EMBED_DIM,
                        seed: int = SVD_SEED) -> DocEmbeddings:
    """TF-IDF reduced to h dimensions by truncated SVD, rows L2-normalized."""
    n, v = c.bow.shape
    if h > min(n, v):
        raise DimensionTooLarge(f"embed dim {h} exceeds min(N, V)={min(n, v)}")
    df = np.asarray((c.bow > 0).sum(axis=0)).ravel().astype(np.float64)
    idf = np.log(np.divide(n, df, out=np.ones_like(df), where=df > 0))
    tfidf = tfidf_matrix(c.bow, idf)
    _, _, v_h = truncated_svd(tfidf, h, seed=seed)
    scores = np.asarray(tfidf @ v_h)
    return DocEmbeddings(matrix=_normalize_rows(scores), idf=idf, projection=v_h)


def embed_new_documents(docs_bow: sparse.csr_matrix, emb: DocEmbeddings) -> np.ndarray:
    """Project unseen documents with the stored TF-IDF/SVD state."""
    if emb.idf is None or emb.projection is None:
        raise NonFiniteValue("embeddings carry no projection state")
    tfidf = tfidf_matrix(docs_bow, emb.idf)
    return _normalize_rows(np.asarray(tfidf @ emb.projection))


def ppmi_matrix(c: Corpus, window: int) -> sparse.csr_matrix:
    """Positive PMI from boolean sliding-window co-occurrence, V x V."""
    n_win, word_counts, pair_counts = window_counts(c.docs, window)
    v = c.vocab_size
    if n_win == 0:
        return sparse.csr_matrix((v, v))
    rows, cols, vals = [], [], []
    for (i, j), nij in pair_counts.items():
        pmi = math.log(nij * n_win / (word_counts[i] * word_counts[j]))
        if pmi > 0:
            rows.extend((i, j))
            cols.extend((j, i))
            vals.extend((pmi, pmi))
    return sparse.csr_matrix((vals, (rows, cols)), shape=(v, v))


def embed_words_ppmi(c: Corpus, h: int = DEFAULT_EMBED_DIM,
                     window: int = DEFAULT_PPMI_WINDOW,
                     seed: int = SVD_SEED) -> WordEmbeddings:
    """PPMI co-occurrence reduced to h dimensions by truncated SVD."""
    if h > c.vocab_size:
        raise DimensionTooLarge(f"embed dim {h} exceeds V={c.vocab_size}")
    ppmi = ppmi_matrix(c, window)
    _, _, v_h = truncated_svd(ppmi, h, seed=seed)
    scores = np.asarray(ppmi @ v_h)
    return WordEmbeddings(matrix=scores)


def load_embeddings(path: str, expected_rows: int, kind: str = "doc"):
    """Load a headerless CSV of reals as document or word embeddings."""
    mat = np.genfromtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    if mat.shape[0] != expected_rows:
        raise RowCountMismatch(f"{path}: {mat.shape[0]} rows, expected {expected_rows}")
    if not np.all(np.isfinite(mat)):
        raise NonFiniteValue(f"{path}: non-finite value in embedding matrix")
    if kind == "doc":
        return DocEmbeddings(matrix=_normalize_rows(mat))
    return WordEmbeddings(matrix=mat)
