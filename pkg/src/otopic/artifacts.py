"""Standardized output files: proportions CSV, topics JSONL, K-sweep TXT.

All writes are atomic (temp file + rename) so an interrupted run never
leaves a truncated artifact behind.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from datetime import datetime, timezone

import numpy as np

from .errors import OtopicError
from .select import KSweepReport

TOOL_VERSION = "0.1.0"

PROPORTIONS_FILE = "proportions.csv"
TOPICS_FILE = "topics.jsonl"
K_REPORT_FILE = "k_report.txt"
MANIFEST_FILE = "manifest.json"


def _atomic_write(path: str, content: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dedupe_labels(labels: list[str]) -> list[str]:
    """Make labels unique by suffixing repeats with " (2)", " (3)", ..."""
    seen: dict[str, int] = {}
    out = []
    for label in labels:
        n = seen.get(label, 0) + 1
        seen[label] = n
        out.append(label if n == 1 else f"{label} ({n})")
    return out


def write_proportions_csv(
    theta: np.ndarray,
    labels: list[str],
    path: str,
    original_texts: list[str] | None = None,
    precision: int = 3,
) -> None:
    """One row per input document, topic columns labeled, fixed precision."""
    if theta.shape[1] != len(labels):
        raise OtopicError("label count does not match topic count")
    if original_texts is not None and len(original_texts) != theta.shape[0]:
        raise OtopicError("text count does not match document count")
    labels = dedupe_labels(labels)
    buf = io.StringIO()
    writer = csv.writer(buf)
    header = (["text"] if original_texts is not None else []) + labels
    writer.writerow(header)
    for i in range(theta.shape[0]):
        row = [f"{v:.{precision}f}" for v in theta[i]]
        if original_texts is not None:
            row = [original_texts[i]] + row
        writer.writerow(row)
    _atomic_write(path, buf.getvalue())


def write_topics_jsonl(
    beta: np.ndarray,
    vocab: list[str],
    labels: list[str],
    descriptions: list[str],
    path: str,
    top_m: int = 10,
    refined: list | None = None,
) -> None:
    """One JSON object per topic with its label, description and top words."""
    from .model import top_words  # local import to avoid a cycle

    k = beta.shape[0]
    if not (len(labels) == len(descriptions) == k):
        raise OtopicError("labels/descriptions do not match topic count")
    word_id = {w: i for i, w in enumerate(vocab)}
    lines = []
    for j in range(k):
        words = top_words(beta[j], vocab, top_m)
        entry = {
            "topic_id": j,
            "label": labels[j],
            "description": descriptions[j],
            "top_words": [
                {"word": w, "weight": float(f"{beta[j, word_id[w]]:.6g}")}
                for w in words
            ],
            "refined_words": [],
            "confidence": 0.0,
        }
        if refined is not None and refined[j] is not None:
            entry["refined_words"] = list(refined[j].refined_words)
            entry["confidence"] = float(refined[j].confidence)
        lines.append(json.dumps(entry, ensure_ascii=False))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_k_report_txt(report: KSweepReport, path: str) -> None:
    """One line per K plus a final CHOSEN line."""
    if not report.rows:
        raise OtopicError("cannot write an empty K report")
    lines = []
    for row in sorted(report.rows, key=lambda r: r.k):
        if row.failed:
            lines.append(f"K={row.k}  FAILED")
        else:
            lines.append(
                f"K={row.k}  TC={row.tc:.4f}  TD={row.td:.4f}  TQ={row.tq:.4f}"
            )
    lines.append(f"CHOSEN K={report.chosen_k}")
    _atomic_write(path, "\n".join(lines) + "\n")


def write_manifest(path: str, seed: int, config: dict) -> None:
    manifest = {
        "tool_version": TOOL_VERSION,
        "seed": seed,
        "config": config,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    _atomic_write(path, json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def read_manifest(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
