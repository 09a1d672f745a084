"""LLM-in-the-loop topic refinement.

A completion endpoint is asked to refine each topic's top words and give a
short label plus a confidence score. Suggestions are sanitized against the
model vocabulary and turned into a confidence-weighted OT alignment loss on
the topic-word distribution. A deterministic stub client keeps everything
offline when no endpoint is configured.
"""

from __future__ import annotations

import json
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import requests

from .errors import ParseError
from .sinkhorn import sinkhorn

API_KEY_ENV = "LX_LLM_API_KEY"

MAX_LABEL_CHARS = 40
MAX_DESCRIPTION_WORDS = 80


@dataclass
class RefinementSuggestion:
    topic_id: int
    original_words: list[str]
    refined_words: list[str]
    label: str
    confidence: float
    source: str  # "llm" | "fallback" | "skipped"


@dataclass
class LlmClientConfig:
    endpoint: str
    model: str = "llama3.1-8b"
    timeout: float = 30.0
    max_retries: int = 2
    api_key_env: str = API_KEY_ENV
    temperature: float = 0.0


@dataclass
class RefineConfig:
    lam: float = 1.0  # weight of the refinement term in the total loss
    interval_epochs: int = 20
    eps_r: float = 0.1
    top_m: int = 10
    concurrency_limit: int = 4


def build_prompt(words: list[str]) -> str:
    """Deterministic refinement prompt requesting strict JSON output."""
    listed = ", ".join(words)
    return (
        "You are refining the word list of one topic from a topic model.\n"
        f"Topic words: {listed}\n"
        f"Return a single JSON object with exactly these keys:\n"
        f'{{"refined_words": [up to {len(words)} words, each drawn from or closely '
        'related to the given words], "label": "a topic label of at most 3 words", '
        '"confidence": a number between 0.0 and 1.0 rating how well the words form '
        "one coherent topic}\n"
        "Respond with the JSON object only."
    )


def build_describe_prompt(label: str, words: list[str]) -> str:
    return (
        f"Write a description of at most {MAX_DESCRIPTION_WORDS} words for a topic "
        f'labeled "{label}" with characteristic words: {", ".join(words)}. '
        "Respond with the description only, as plain text."
    )


_JSON_OBJECT = re.compile(r"\{.*\}", re.DOTALL)


def parse_response(text: str) -> dict:
    """Extract the first JSON object from a completion, tolerating code fences.

    Returns {"refined_words": [...], "label": str, "confidence": float | None}.
    """
    match = _JSON_OBJECT.search(text)
    if match is None:
        raise ParseError("no JSON object in completion")
    try:
        obj = json.loads(match.group(0))
    except json.JSONDecodeError as exc:
        raise ParseError(f"unparseable JSON in completion: {exc}") from exc
    if not isinstance(obj, dict):
        raise ParseError("completion JSON is not an object")
    refined = [str(w) for w in obj.get("refined_words", []) if isinstance(w, (str, int))]
    label = str(obj.get("label", "")).strip()[:MAX_LABEL_CHARS]
    confidence = obj.get("confidence")
    if confidence is not None:
        try:
            confidence = min(1.0, max(0.0, float(confidence)))
        except (TypeError, ValueError):
            confidence = None
    return {"refined_words": refined, "label": label, "confidence": confidence}


def sanitize(suggestion: RefinementSuggestion, vocab: set[str]) -> RefinementSuggestion:
    """Drop out-of-vocabulary and duplicate refined words; skip if < 2 remain."""
    seen = set()
    kept = []
    for w in suggestion.refined_words:
        if w in vocab and w not in seen:
            seen.add(w)
            kept.append(w)
    suggestion.refined_words = kept
    if len(kept) < 2:
        suggestion.source = "skipped"
        suggestion.confidence = 0.0
    return suggestion


def confidence_fallback(original: set[str], refined: set[str]) -> float:
    """Jaccard overlap, used when the LLM omits its own confidence."""
    if not original or not refined:
        raise ValueError("both word sets must be nonempty")
    return len(original & refined) / len(original | refined)


def refine_loss(
    p_k: np.ndarray,
    support_ids: list[int],
    refined_ids: list[int],
    word_emb: np.ndarray,
    eps_r: float,
    max_iters: int = 200,
    tol: float = 1e-6,
) -> tuple[float, np.ndarray]:
    """OT alignment between a topic's restricted word distribution and the
    uniform distribution over its refined words.

    Cost is cosine distance between word embeddings, clamped to [0, 2].
    Returns the transport cost and its gradient with respect to p_k, taken
    as the centered source dual potential of the converged solve.
    """
    src = word_emb[support_ids]
    dst = word_emb[refined_ids]
    src_n = np.linalg.norm(src, axis=1)
    dst_n = np.linalg.norm(dst, axis=1)
    denom = np.outer(src_n, dst_n)
    cos = np.divide(src @ dst.T, denom, out=np.zeros((len(src), len(dst))), where=denom > 0)
    cost = np.clip(1.0 - cos, 0.0, 2.0)
    u = np.full(len(refined_ids), 1.0 / len(refined_ids))
    res = sinkhorn(cost, p_k, u, eps_r, max_iters=max_iters, tol=tol)
    return res.cost(cost), res.dual_f


def total_loss(recon: float, suggestions: list[RefinementSuggestion],
               per_topic_losses: dict[int, float], lam: float) -> float:
    """recon + lam * sum of confidence-weighted per-topic alignment losses."""
    if lam == 0.0:
        return recon
    total = recon
    for s in suggestions:
        if s.source != "skipped" and s.topic_id in per_topic_losses:
            total += lam * s.confidence * per_topic_losses[s.topic_id]
    return total


def describe_topic(label: str, refined_words: list[str], client) -> str:
    """Short natural-language description; falls back to a template on failure."""
    fallback = "Topic about: " + ", ".join(refined_words)
    try:
        text = client.complete(build_describe_prompt(label, refined_words)).strip()
    except Exception:
        return fallback
    if not text:
        return fallback
    words = text.split()
    if len(words) > MAX_DESCRIPTION_WORDS:
        text = " ".join(words[:MAX_DESCRIPTION_WORDS])
    return text


class LlmClient:
    """Minimal OpenAI-compatible chat completion client with retries."""

    def __init__(self, config: LlmClientConfig):
        self.config = config

    def complete(self, prompt: str) -> str:
        cfg = self.config
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(cfg.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        payload = {
            "model": cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": cfg.temperature,
        }
        last_exc: Exception | None = None
        for attempt in range(cfg.max_retries + 1):
            try:
                resp = requests.post(
                    cfg.endpoint, headers=headers, json=payload, timeout=cfg.timeout
                )
                resp.raise_for_status()
                body = resp.json()
                return str(body["choices"][0]["message"]["content"])
            except Exception as exc:  # noqa: BLE001 - any failure triggers a retry
                last_exc = exc
                if attempt < cfg.max_retries:
                    time.sleep(min(2.0**attempt, 4.0))
        raise RuntimeError(f"completion request failed: {last_exc}")


class StubClient:
    """Offline stand-in that always fails, forcing deterministic fallbacks."""

    def complete(self, prompt: str) -> str:
        raise RuntimeError("stub client performs no network calls")


def _stub_label(words: list[str]) -> str:
    return " ".join(w.title() for w in words[:2])


class StubRefiner:
    """Deterministic offline refiner.

    Echoes the input words as refined words with confidence 0.5; in skip
    mode every suggestion is skipped so no refinement loss is applied.
    Descriptions always use the fallback template.
    """

    def __init__(self, skip: bool = False):
        self.skip = skip

    def suggest_all(self, topic_words: list[list[str]], vocab: set[str]) -> list[RefinementSuggestion]:
        out = []
        for k, words in enumerate(topic_words):
            if self.skip:
                out.append(RefinementSuggestion(
                    topic_id=k, original_words=list(words), refined_words=[],
                    label=_stub_label(words), confidence=0.0, source="skipped",
                ))
            else:
                s = RefinementSuggestion(
                    topic_id=k, original_words=list(words), refined_words=list(words),
                    label=_stub_label(words), confidence=0.5, source="llm",
                )
                out.append(sanitize(s, vocab))
        return out

    def describe(self, label: str, refined_words: list[str]) -> str:
        return describe_topic(label, refined_words, StubClient())


class LlmRefiner:
    """Refiner backed by a chat-completion endpoint.

    Per-topic calls run concurrently up to the configured limit; results
    are returned in topic order. Any per-topic failure degrades to a
    skipped suggestion so training never aborts.
    """

    def __init__(self, client, refine_cfg: RefineConfig):
        self.client = client
        self.cfg = refine_cfg

    def _suggest_one(self, topic_id: int, words: list[str], vocab: set[str]) -> RefinementSuggestion:
        skipped = RefinementSuggestion(
            topic_id=topic_id, original_words=list(words), refined_words=[],
            label=_stub_label(words), confidence=0.0, source="skipped",
        )
        try:
            parsed = parse_response(self.client.complete(build_prompt(words)))
        except Exception:
            return skipped
        source = "llm"
        confidence = parsed["confidence"]
        suggestion = RefinementSuggestion(
            topic_id=topic_id,
            original_words=list(words),
            refined_words=parsed["refined_words"],
            label=parsed["label"] or _stub_label(words),
            confidence=confidence if confidence is not None else 0.0,
            source=source,
        )
        suggestion = sanitize(suggestion, vocab)
        if suggestion.source != "skipped" and confidence is None:
            suggestion.confidence = confidence_fallback(
                set(words), set(suggestion.refined_words)
            )
            suggestion.source = "fallback"
        return suggestion

    def suggest_all(self, topic_words: list[list[str]], vocab: set[str]) -> list[RefinementSuggestion]:
        with ThreadPoolExecutor(max_workers=max(1, self.cfg.concurrency_limit)) as pool:
            futures = [
                pool.submit(self._suggest_one, k, words, vocab)
                for k, words in enumerate(topic_words)
            ]
            return [f.result() for f in futures]

    def describe(self, label: str, refined_words: list[str]) -> str:
        return describe_topic(label, refined_words, self.client)
