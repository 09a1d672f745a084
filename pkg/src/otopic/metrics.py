"""Topic coherence, diversity, quality and downstream evaluation."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .cooccur import window_counts
from .corpus import Corpus
from .errors import DimensionMismatch, EmptyReference, LengthMismatch, MissingLabels

NPMI_SMOOTHING = 1e-12
DEFAULT_COHERENCE_WINDOW = 10
DEFAULT_TOP_N = 10


@dataclass
class MetricsReport:
    tc_per_topic: list[float]
    tc_mean: float
    td: float
    tq: float
    purity: float | None = None
    nmi: float | None = None
    pn: float | None = None
    acc: float | None = None


def pair_npmi(c_i: int, c_j: int, c_ij: int, n_windows: int) -> float:
    """NPMI of one word pair from window presence counts.

    Words absent from the reference get -1 for all their pairs; a pair
    present in every window is perfect association (+1).
    """
    if c_i == 0 or c_j == 0:
        return -1.0
    if c_ij == n_windows:
        return 1.0
    p_i = c_i / n_windows
    p_j = c_j / n_windows
    p_ij = c_ij / n_windows + NPMI_SMOOTHING
    return math.log(p_ij / (p_i * p_j)) / (-math.log(p_ij))


def npmi_coherence(
    topics: list[list[str]],
    ref: Corpus,
    window: int = DEFAULT_COHERENCE_WINDOW,
) -> tuple[list[float], float]:
    """Mean pairwise NPMI of each topic's words over the reference corpus."""
    if ref.n_docs == 0 or all(not d for d in ref.docs):
        raise EmptyReference("reference corpus has no tokens")
    word_id = {w: i for i, w in enumerate(ref.vocab)}
    tracked = {word_id[w] for t in topics for w in t if w in word_id}
    n_win, wc, pc = window_counts(ref.docs, window, restrict=tracked)

    per_topic = []
    for words in topics:
        if len(words) < 2:
            raise ValueError("topics need at least 2 words for coherence")
        vals = []
        for a, b in combinations(words, 2):
            ia, ib = word_id.get(a, -1), word_id.get(b, -1)
            if ia < 0 or ib < 0:
                vals.append(-1.0)
                continue
            key = (min(ia, ib), max(ia, ib))
            vals.append(pair_npmi(wc[ia], wc[ib], pc.get(key, 0), n_win))
        per_topic.append(sum(vals) / len(vals))
    return per_topic, sum(per_topic) / len(per_topic)


def topic_diversity(topics: list[list[str]], n: int = DEFAULT_TOP_N) -> float:
    """Fraction of unique words among all topics' top-n words."""
    for words in topics:
        if len(words) != n:
            raise LengthMismatch(f"expected {n} words per topic, got {len(words)}")
    union = {w for t in topics for w in t}
    return len(union) / (len(topics) * n)


def topic_quality(tc: float, td: float) -> float:
    return tc * td


def _entropy(counts: np.ndarray) -> float:
    p = counts / counts.sum()
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def cluster_eval(theta: np.ndarray, labels: list) -> tuple[float, float, float]:
    """Purity, NMI and their mean for argmax-topic cluster assignments."""
    if labels is None or len(labels) != theta.shape[0]:
        raise MissingLabels("labels missing or misaligned with theta")
    assign = np.argmax(theta, axis=1)  # ties resolve to the lowest k
    labels = np.asarray(labels)
    classes, y = np.unique(labels, return_inverse=True)
    clusters = np.unique(assign)

    n = len(y)
    contingency = np.zeros((len(clusters), len(classes)))
    cluster_index = {c: i for i, c in enumerate(clusters)}
    for a, c in zip(assign, y):
        contingency[cluster_index[a], c] += 1

    purity = float(contingency.max(axis=1).sum() / n)

    h_clusters = _entropy(contingency.sum(axis=1))
    h_classes = _entropy(contingency.sum(axis=0))
    if h_clusters == 0.0 and h_classes == 0.0:
        nmi = 1.0  # both partitions singular: trivially identical
    elif h_clusters == 0.0 or h_classes == 0.0:
        nmi = 0.0
    else:
        p_uc = contingency / n
        p_u = p_uc.sum(axis=1)
        p_c = p_uc.sum(axis=0)
        mask = p_uc > 0
        mi = float((p_uc[mask] * np.log(p_uc[mask] / np.outer(p_u, p_c)[mask])).sum())
        nmi = mi / math.sqrt(h_clusters * h_classes)
    return purity, nmi, (purity + nmi) / 2


def classify_eval(
    theta_train: np.ndarray,
    y_train: list,
    theta_test: np.ndarray,
    y_test: list,
    k_neighbors: int = 5,
) -> float:
    """k-NN accuracy on proportion vectors, with deterministic tie rules."""
    if theta_train.shape[1] != theta_test.shape[1]:
        raise DimensionMismatch("train/test proportion dims differ")
    if len(y_train) != theta_train.shape[0] or len(y_test) != theta_test.shape[0]:
        raise MissingLabels("labels misaligned with proportion matrices")
    y_train = list(y_train)
    train_freq = Counter(y_train)
    k = min(k_neighbors, len(y_train))

    correct = 0
    for i in range(theta_test.shape[0]):
        d = np.linalg.norm(theta_train - theta_test[i], axis=1)
        # stable sort keeps the lower index on exact distance ties
        neighbors = np.argsort(d, kind="stable")[:k]
        votes = Counter(y_train[j] for j in neighbors)
        best = max(votes.values())
        tied = [c for c, v in votes.items() if v == best]
        # vote ties break toward the most frequent training class
        pred = sorted(tied, key=lambda c: (-train_freq[c], str(c)))[0]
        if pred == y_test[i]:
            correct += 1
    return correct / theta_test.shape[0]
