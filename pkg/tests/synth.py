"""Synthetic planted-topic corpus used by training and sweep tests.

Five topics, each owning 40 exclusive words of a 200-word vocabulary.
Each document draws ~50 tokens: 80% from its planted topic's words and
20% uniformly from the whole vocabulary.
"""

from __future__ import annotations

import csv
import itertools
import string

import numpy as np

N_TOPICS = 5
WORDS_PER_TOPIC = 40
VOCAB_SIZE = N_TOPICS * WORDS_PER_TOPIC
N_DOCS = 500
TOKENS_PER_DOC = 50
DOMINANT_MASS = 0.8


def make_vocab() -> list[str]:
    # purely alphabetic words so the tokenizer keeps them intact
    pairs = itertools.product(string.ascii_lowercase, repeat=2)
    return ["w" + a + b for a, b in itertools.islice(pairs, VOCAB_SIZE)]


def generate(seed: int = 0) -> tuple[list[str], list[int]]:
    """Returns (documents, planted topic labels)."""
    rng = np.random.default_rng(seed)
    vocab = make_vocab()
    topic_words = [
        vocab[k * WORDS_PER_TOPIC : (k + 1) * WORDS_PER_TOPIC] for k in range(N_TOPICS)
    ]
    docs, labels = [], []
    for _ in range(N_DOCS):
        k = int(rng.integers(N_TOPICS))
        n_tokens = int(rng.poisson(TOKENS_PER_DOC))
        n_tokens = max(n_tokens, 10)
        tokens = []
        for _ in range(n_tokens):
            if rng.random() < DOMINANT_MASS:
                tokens.append(topic_words[k][int(rng.integers(WORDS_PER_TOPIC))])
            else:
                tokens.append(vocab[int(rng.integers(VOCAB_SIZE))])
        docs.append(" ".join(tokens))
        labels.append(k)
    return docs, labels


def write_csv(path, seed: int = 0) -> list[int]:
    docs, labels = generate(seed)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["review", "category"])
        for doc, label in zip(docs, labels):
            writer.writerow([doc, f"cat{label}"])
    return labels
