"""CSV ingestion, tokenization and bag-of-words construction."""

from __future__ import annotations

import csv
import os
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import EmptyVocabulary, FileTooLarge, MalformedCsv, MissingColumn
from .stopwords import ENGLISH_STOPWORDS

DEFAULT_MAX_BYTES = 5 * 2**20  # 5 MiB upload limit

_ALPHA_RUN = re.compile(r"[a-zA-Z]+")


@dataclass
class RawCorpus:
    """Documents as read from the input CSV, one record per data row."""

    texts: list[str]
    labels: list[str] | None = None

    def __len__(self) -> int:
        return len(self.texts)


@dataclass
class PreprocessConfig:
    lowercase: bool = True
    min_token_len: int = 2
    min_df: int = 2
    max_df_ratio: float = 0.95
    stopwords: frozenset[str] = ENGLISH_STOPWORDS
    max_vocab: int | None = None


@dataclass
class Corpus:
    """Tokenized corpus over a fixed vocabulary.

    docs[i] holds the vocabulary token ids of document i, in text order.
    bow is the N x V count matrix; row i sums to len(docs[i]). Documents
    whose tokens are all filtered out stay in place (empty_docs) so output
    rows remain aligned with the input CSV.
    """

    docs: list[list[int]]
    vocab: list[str]
    bow: sparse.csr_matrix
    labels: list[str] | None = None
    empty_docs: set[int] = field(default_factory=set)
    raw_token_counts: list[int] = field(default_factory=list)

    @property
    def n_docs(self) -> int:
        return len(self.docs)

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)


@dataclass
class StatsReport:
    n_docs: int
    vocab_size: int
    avg_doc_length: float
    avg_raw_doc_length: float
    n_categories: int | None
    n_empty_docs: int


def load_csv(
    path: str,
    text_column: str,
    label_column: str | None = None,
    max_bytes: int = DEFAULT_MAX_BYTES,
) -> RawCorpus:
    """Read one text (and optionally one label) column from a CSV file."""
    size = os.path.getsize(path)
    if size > max_bytes:
        raise FileTooLarge(f"input is {size} bytes, limit is {max_bytes}")

    texts: list[str] = []
    labels: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader, None)
            if header is None:
                raise MalformedCsv("file has no header row")
            if text_column not in header:
                raise MissingColumn(f"column {text_column!r} not in header {header}")
            text_idx = header.index(text_column)
            label_idx = None
            if label_column is not None:
                if label_column not in header:
                    raise MissingColumn(f"column {label_column!r} not in header {header}")
                label_idx = header.index(label_column)
            for row in reader:
                if not row:  # blank line
                    continue
                if len(row) <= text_idx or (label_idx is not None and len(row) <= label_idx):
                    raise MalformedCsv(f"row {reader.line_num}: too few fields")
                texts.append(row[text_idx])
                if label_idx is not None:
                    labels.append(row[label_idx])
        except csv.Error as exc:
            raise MalformedCsv(f"line {reader.line_num}: {exc}") from exc

    return RawCorpus(texts=texts, labels=labels if label_column is not None else None)


def tokenize(text: str, cfg: PreprocessConfig) -> list[str]:
    """Maximal alphabetic runs, lowercased, length-filtered, stopwords removed."""
    if cfg.lowercase:
        text = text.lower()
    return [
        tok
        for tok in _ALPHA_RUN.findall(text)
        if len(tok) >= cfg.min_token_len and tok not in cfg.stopwords
    ]


def preprocess(raw: RawCorpus, cfg: PreprocessConfig) -> Corpus:
    """Tokenize, build the df-thresholded vocabulary and the BoW matrix."""
    n = len(raw)
    token_docs = [tokenize(t, cfg) for t in raw.texts]
    raw_counts = [len(toks) for toks in token_docs]

    df: Counter[str] = Counter()
    tf: Counter[str] = Counter()
    for toks in token_docs:
        tf.update(toks)
        df.update(set(toks))

    max_df = cfg.max_df_ratio * n
    kept = [w for w in df if cfg.min_df <= df[w] <= max_df]
    if not kept:
        raise EmptyVocabulary(
            f"no word satisfies {cfg.min_df} <= df <= {max_df:.1f} over {n} documents"
        )
    if cfg.max_vocab is not None and len(kept) > cfg.max_vocab:
        kept.sort(key=lambda w: (-tf[w], w))
        kept = kept[: cfg.max_vocab]
    vocab = sorted(kept)
    word_id = {w: i for i, w in enumerate(vocab)}

    docs: list[list[int]] = []
    empty: set[int] = set()
    rows, cols, vals = [], [], []
    for i, toks in enumerate(token_docs):
        ids = [word_id[t] for t in toks if t in word_id]
        docs.append(ids)
        if not ids:
            empty.add(i)
            continue
        counts = Counter(ids)
        rows.extend([i] * len(counts))
        cols.extend(counts.keys())
        vals.extend(counts.values())

    bow = sparse.csr_matrix(
        (vals, (rows, cols)), shape=(n, len(vocab)), dtype=np.int64
    )
    return Corpus(
        docs=docs,
        vocab=vocab,
        bow=bow,
        labels=raw.labels,
        empty_docs=empty,
        raw_token_counts=raw_counts,
    )


def corpus_stats(c: Corpus) -> StatsReport:
    n = c.n_docs
    total = sum(len(d) for d in c.docs)
    total_raw = sum(c.raw_token_counts) if c.raw_token_counts else total
    return StatsReport(
        n_docs=n,
        vocab_size=c.vocab_size,
        avg_doc_length=round(total / n, 1),
        avg_raw_doc_length=round(total_raw / n, 1),
        n_categories=len(set(c.labels)) if c.labels else None,
        n_empty_docs=len(c.empty_docs),
    )
