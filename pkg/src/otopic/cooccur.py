"""Sliding-window presence counts shared by PPMI embeddings and coherence."""

from __future__ import annotations

from collections import Counter
from itertools import combinations


def window_counts(
    docs: list[list[int]],
    window: int,
    restrict: set[int] | None = None,
) -> tuple[int, Counter, Counter]:
    """Count windows containing each word / unordered word pair.

    Windows of length `window` slide by one token within each document;
    documents shorter than the window form a single window. Empty documents
    contribute no windows. Presence is boolean per window. When `restrict`
    is given, only those token ids are tracked.

    Returns (n_windows, word_counts, pair_counts) with pair keys (i, j), i < j.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    n_windows = 0
    word_counts: Counter = Counter()
    pair_counts: Counter = Counter()
    for toks in docs:
        if not toks:
            continue
        spans = range(max(1, len(toks) - window + 1))
        for start in spans:
            n_windows += 1
            present = set(toks[start : start + window])
            if restrict is not None:
                present &= restrict
            for w in present:
                word_counts[w] += 1
            for i, j in combinations(sorted(present), 2):
                pair_counts[(i, j)] += 1
    return n_windows, word_counts, pair_counts
