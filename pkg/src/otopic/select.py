"""Automatic topic-count selection by sweeping K and maximizing topic quality."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

from .corpus import Corpus
from .errors import SweepFailed
from .metrics import npmi_coherence, topic_diversity, topic_quality
from .model import FitResult, ModelConfig, fit, top_words

DEFAULT_K_GRID = (10, 20, 30, 40, 50)


@dataclass
class KSweepRow:
    k: int
    tc: float
    td: float
    tq: float
    wall_seconds: float
    failed: bool = False


@dataclass
class KSweepReport:
    rows: list[KSweepRow]
    chosen_k: int


def sweep_k(
    c: Corpus,
    doc_emb,
    word_emb,
    grid: list[int],
    cfg_template: ModelConfig,
    refiner=None,
    refine_cfg=None,
    coherence_window: int = 10,
    top_n: int = 10,
    keep_fits: bool = False,
) -> KSweepReport | tuple[KSweepReport, dict[int, FitResult]]:
    """Fit once per K (same seed throughout) and pick the K with the best TQ.

    A failed K is kept in the report with TQ = -inf and excluded from the
    argmax; ties break toward the smallest K.
    """
    if not grid:
        raise SweepFailed("empty K grid")
    rows: list[KSweepRow] = []
    fits: dict[int, FitResult] = {}
    for k in sorted(set(grid)):
        start = time.monotonic()
        try:
            if k < 2 or k > c.n_docs:
                raise ValueError(f"K={k} outside [2, N={c.n_docs}]")
            result = fit(c, doc_emb, word_emb, replace(cfg_template, k=k),
                         refiner=refiner, refine_cfg=refine_cfg)
            topics = [top_words(result.beta[j], c.vocab, top_n) for j in range(k)]
            _, tc = npmi_coherence(topics, c, window=coherence_window)
            td = topic_diversity(topics, n=top_n)
            rows.append(KSweepRow(k=k, tc=tc, td=td, tq=topic_quality(tc, td),
                                  wall_seconds=time.monotonic() - start))
            if keep_fits:
                fits[k] = result
        except Exception:
            rows.append(KSweepRow(k=k, tc=float("nan"), td=float("nan"),
                                  tq=-math.inf, wall_seconds=time.monotonic() - start,
                                  failed=True))
    ok = [r for r in rows if not r.failed]
    if not ok:
        raise SweepFailed("every K in the grid failed")
    chosen = max(ok, key=lambda r: (r.tq, -r.k)).k
    report = KSweepReport(rows=rows, chosen_k=chosen)
    return (report, fits) if keep_fits else report
