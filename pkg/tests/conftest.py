import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synth import generate  # noqa: E402

from otopic.corpus import PreprocessConfig, RawCorpus, preprocess  # noqa: E402
from otopic.embed import embed_documents_lsa, embed_words_ppmi  # noqa: E402

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def planted():
    """Planted-topic corpus with its embeddings, shared across the session."""
    docs, labels = generate(0)
    raw = RawCorpus(texts=docs, labels=[f"cat{l}" for l in labels])
    corpus = preprocess(raw, PreprocessConfig())
    doc_emb = embed_documents_lsa(corpus, 64)
    word_emb = embed_words_ppmi(corpus, 64, window=10)
    return corpus, doc_emb, word_emb, labels


@pytest.fixture(scope="session")
def tiny_corpus():
    """Three tiny documents with a 2-word surviving vocabulary."""
    raw = RawCorpus(texts=["red cat", "red dog", "blue dog"])
    return preprocess(raw, PreprocessConfig(min_df=2, stopwords=frozenset()))
