"""Neural topic model trained through entropic optimal transport.

Topic embeddings T and word embeddings W are learned so that the Sinkhorn
transport plan between document and topic embeddings yields document-topic
proportions theta, and the plan between topic and word embeddings yields
topic-word distributions beta, minimizing cross-entropy reconstruction of
the bag-of-words.

Gradients use the detached-scaling surrogate: the converged Sinkhorn
scalings are treated as constants, so theta and beta become row softmaxes
of the (dual-shifted) negative cost and are differentiated in closed form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import sparse

from .corpus import Corpus
from .embed import DocEmbeddings, WordEmbeddings
from .errors import DimensionMismatch
from .refine import RefineConfig, RefinementSuggestion, refine_loss
from .sinkhorn import TransportPlan, sinkhorn

PROB_FLOOR = 1e-12


@dataclass
class ModelConfig:
    k: int
    h: int = 64
    eps_dt: float = 0.1
    eps_tw: float = 0.1
    sinkhorn_iters: int = 200
    sinkhorn_tol: float = 1e-6
    epochs: int = 200
    warmup_epochs: int = 100
    lr: float = 2e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    seed: int = 0
    top_m: int = 10

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.warmup_epochs > self.epochs:
            raise ValueError("warmup_epochs must not exceed epochs")
        if self.eps_dt <= 0 or self.eps_tw <= 0:
            raise ValueError("entropic regularization must be positive")


@dataclass
class TopicModel:
    T: np.ndarray  # K x H topic embeddings
    W: np.ndarray  # V x H word embeddings
    config: ModelConfig
    vocab: list[str]


@dataclass
class FitResult:
    theta: np.ndarray  # N x K, uncalibrated
    beta: np.ndarray  # K x V
    loss_trace: list[float]
    model: TopicModel
    suggestions: list[RefinementSuggestion] | None = None
    labels: list[str] = field(default_factory=list)
    descriptions: list[str] = field(default_factory=list)


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float, beta1: float, beta2: float,
                 eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            m_hat = m / (1 - self.beta1**self.t)
            v_hat = v / (1 - self.beta2**self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def squared_distances(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    sq = (
        np.sum(x * x, axis=1)[:, None]
        + np.sum(y * y, axis=1)[None, :]
        - 2.0 * (x @ y.T)
    )
    return np.clip(sq, 0.0, None)


def _row_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _transport(x: np.ndarray, y: np.ndarray, eps: float, max_iters: int,
               tol: float) -> tuple[TransportPlan, np.ndarray]:
    cost = squared_distances(x, y)
    a = np.full(x.shape[0], 1.0 / x.shape[0])
    b = np.full(y.shape[0], 1.0 / y.shape[0])
    return sinkhorn(cost, a, b, eps, max_iters=max_iters, tol=tol), cost


def proportions_from_duals(cost: np.ndarray, dual_g: np.ndarray, eps: float) -> np.ndarray:
    """Row-renormalized transport plan, written as a softmax of (g - cost)/eps."""
    return _row_softmax((dual_g[None, :] - cost) / eps)


def doc_topic(doc_emb: np.ndarray, t: np.ndarray, eps_dt: float,
              max_iters: int = 200, tol: float = 1e-6,
              empty_docs: set[int] | None = None) -> np.ndarray:
    """Document-topic proportions from the doc/topic transport plan."""
    res, cost = _transport(doc_emb, t, eps_dt, max_iters, tol)
    theta = proportions_from_duals(cost, res.dual_g, eps_dt)
    if empty_docs:
        theta[sorted(empty_docs)] = 1.0 / t.shape[0]
    return theta


def topic_word(t: np.ndarray, w: np.ndarray, eps_tw: float,
               max_iters: int = 200, tol: float = 1e-6) -> np.ndarray:
    """Topic-word distributions from the topic/word transport plan."""
    res, cost = _transport(t, w, eps_tw, max_iters, tol)
    return proportions_from_duals(cost, res.dual_g, eps_tw)


def normalized_bow(c: Corpus) -> sparse.csr_matrix:
    """Row-normalized BoW; empty documents stay all-zero rows."""
    xhat = c.bow.tocsr().astype(np.float64)
    sums = np.asarray(xhat.sum(axis=1)).ravel()
    inv = np.divide(1.0, sums, out=np.zeros_like(sums), where=sums > 0)
    return sparse.diags(inv) @ xhat


def recon_loss(xhat: sparse.csr_matrix, theta: np.ndarray, beta: np.ndarray) -> float:
    """-(1/N) sum_i sum_v xhat[i,v] log (theta beta)[i,v], floored at 1e-12."""
    mix = np.clip(theta @ beta, PROB_FLOOR, None)
    rows, cols = xhat.nonzero()
    return float(-(xhat.data * np.log(mix[rows, cols])).sum() / xhat.shape[0])


def top_words(beta_k: np.ndarray, vocab: list[str], m: int = 10) -> list[str]:
    """Top m words by weight, ties broken lexicographically."""
    order = sorted(range(len(vocab)), key=lambda v: (-beta_k[v], vocab[v]))
    return [vocab[v] for v in order[:m]]


def _project_rows(mat: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    return np.divide(mat, norms, out=mat.copy(), where=norms > 0)


def kmeanspp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding over the given points; returns k rows."""
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((points - points[idx]) ** 2, axis=1))
    return points[chosen].copy()


def surrogate_state(doc_x: np.ndarray, t: np.ndarray, w: np.ndarray, cfg: ModelConfig):
    """Solve both transports and return frozen duals plus theta/beta."""
    res_dt, cost_dt = _transport(doc_x, t, cfg.eps_dt, cfg.sinkhorn_iters, cfg.sinkhorn_tol)
    res_tw, cost_tw = _transport(t, w, cfg.eps_tw, cfg.sinkhorn_iters, cfg.sinkhorn_tol)
    theta = proportions_from_duals(cost_dt, res_dt.dual_g, cfg.eps_dt)
    beta = proportions_from_duals(cost_tw, res_tw.dual_g, cfg.eps_tw)
    return res_dt.dual_g, res_tw.dual_g, theta, beta


def surrogate_theta_beta(doc_x: np.ndarray, t: np.ndarray, w: np.ndarray,
                         g_dt: np.ndarray, g_tw: np.ndarray,
                         cfg: ModelConfig) -> tuple[np.ndarray, np.ndarray]:
    """theta/beta as functions of T, W with the Sinkhorn scalings frozen."""
    theta = proportions_from_duals(squared_distances(doc_x, t), g_dt, cfg.eps_dt)
    beta = proportions_from_duals(squared_distances(t, w), g_tw, cfg.eps_tw)
    return theta, beta


def surrogate_loss_and_grads(
    doc_x: np.ndarray,
    t: np.ndarray,
    w: np.ndarray,
    xhat: sparse.csr_matrix,
    g_dt: np.ndarray,
    g_tw: np.ndarray,
    cfg: ModelConfig,
    beta_grad_extra: np.ndarray | None = None,
):
    """Reconstruction loss plus analytic gradients under frozen scalings.

    beta_grad_extra, when given, is an additional dL/dbeta term (from the
    refinement objective) backpropagated through the same beta softmax.
    Returns (loss, grad_T, grad_W, theta, beta).
    """
    n = doc_x.shape[0]
    theta, beta = surrogate_theta_beta(doc_x, t, w, g_dt, g_tw, cfg)
    mix = theta @ beta
    rows, cols = xhat.nonzero()
    vals = np.clip(mix[rows, cols], PROB_FLOOR, None)
    loss = float(-(xhat.data * np.log(vals)).sum() / n)

    # dL/dmix at the nonzeros of xhat (floored entries get zero gradient)
    g_vals = np.where(mix[rows, cols] > PROB_FLOOR, -xhat.data / (n * vals), 0.0)
    g_mix = sparse.csr_matrix((g_vals, (rows, cols)), shape=mix.shape)
    g_theta = np.asarray(g_mix @ beta.T)
    g_beta = np.asarray(g_mix.T @ theta).T
    if beta_grad_extra is not None:
        g_beta = g_beta + beta_grad_extra

    # softmax backward, rows independent
    gs_dt = theta * (g_theta - (g_theta * theta).sum(axis=1, keepdims=True))
    gs_tw = beta * (g_beta - (g_beta * beta).sum(axis=1, keepdims=True))
    g_cost_dt = -gs_dt / cfg.eps_dt
    g_cost_tw = -gs_tw / cfg.eps_tw

    # cost_dt[i,k] = ||x_i - t_k||^2, cost_tw[k,v] = ||t_k - w_v||^2
    grad_t = 2.0 * (
        g_cost_dt.sum(axis=0)[:, None] * t - g_cost_dt.T @ doc_x
    ) + 2.0 * (g_cost_tw.sum(axis=1)[:, None] * t - g_cost_tw @ w)
    grad_w = 2.0 * (g_cost_tw.sum(axis=0)[:, None] * w - g_cost_tw.T @ t)
    return loss, grad_t, grad_w, theta, beta


def _refinement_term(beta, suggestions, supports, word_to_id, w, refine_cfg, cfg):
    """Per-topic alignment losses and the summed dL/dbeta contribution."""
    losses: dict[int, float] = {}
    g_beta = np.zeros_like(beta)
    for s in suggestions:
        if s.source == "skipped" or s.confidence == 0.0:
            continue
        support = supports[s.topic_id]
        b = beta[s.topic_id, support]
        total = b.sum()
        p = b / total
        refined_ids = [word_to_id[wd] for wd in s.refined_words]
        lk, f = refine_loss(p, list(support), refined_ids, w, refine_cfg.eps_r,
                            max_iters=cfg.sinkhorn_iters, tol=cfg.sinkhorn_tol)
        losses[s.topic_id] = lk
        scale = refine_cfg.lam * s.confidence
        g_beta[s.topic_id, support] += scale * (f - float(f @ p)) / total
    return losses, g_beta


def fit(
    c: Corpus,
    doc_emb: DocEmbeddings,
    word_emb_init: WordEmbeddings,
    cfg: ModelConfig,
    refiner=None,
    refine_cfg: RefineConfig | None = None,
) -> FitResult:
    """Train topic and word embeddings with Adam on the surrogate loss.

    The refiner (when given and lam > 0) is consulted on a fixed epoch
    cadence after warm-up; its confidence-weighted alignment losses are
    added to the objective. After training it is run once more to produce
    final labels and descriptions.
    """
    if doc_emb.matrix.shape[1] != word_emb_init.matrix.shape[1]:
        raise DimensionMismatch("document and word embedding dims differ")
    refine_cfg = refine_cfg or RefineConfig(top_m=cfg.top_m)
    rng = np.random.default_rng(cfg.seed)
    x = doc_emb.matrix
    t = kmeanspp_init(x, cfg.k, rng)
    t = t + 1e-3 * rng.standard_normal(t.shape)  # break exact duplicates
    t = _project_rows(t)
    # word embeddings start on the unit sphere so both cost matrices live on
    # the same scale as the unit-norm document embeddings
    w = word_emb_init.matrix.copy()
    w_norms = np.linalg.norm(w, axis=1, keepdims=True)
    w = np.divide(w, w_norms, out=w, where=w_norms > 0)
    xhat = normalized_bow(c)
    word_to_id = {wd: i for i, wd in enumerate(c.vocab)}
    vocab_set = set(c.vocab)

    adam = Adam([t, w], cfg.lr, cfg.adam_beta1, cfg.adam_beta2)
    loss_trace: list[float] = []
    suggestions: list[RefinementSuggestion] | None = None
    supports: dict[int, np.ndarray] = {}
    refine_active = refiner is not None and refine_cfg.lam > 0

    theta = beta = None
    for epoch in range(cfg.epochs):
        g_dt, g_tw, theta, beta = surrogate_state(x, t, w, cfg)

        beta_grad_extra = None
        refine_term = 0.0
        if refine_active and epoch >= cfg.warmup_epochs:
            since = epoch - cfg.warmup_epochs
            if suggestions is None or since % refine_cfg.interval_epochs == 0:
                words = [top_words(beta[k], c.vocab, refine_cfg.top_m) for k in range(cfg.k)]
                try:
                    suggestions = refiner.suggest_all(words, vocab_set)
                except Exception:
                    suggestions = None  # degrade to no refinement this cycle
                if suggestions is not None:
                    supports = {
                        k: np.argsort(-beta[k], kind="stable")[: refine_cfg.top_m]
                        for k in range(cfg.k)
                    }
            if suggestions is not None:
                losses, beta_grad_extra = _refinement_term(
                    beta, suggestions, supports, word_to_id, w, refine_cfg, cfg
                )
                refine_term = sum(
                    refine_cfg.lam * s.confidence * losses[s.topic_id]
                    for s in suggestions
                    if s.source != "skipped" and s.topic_id in losses
                )

        loss, grad_t, grad_w, theta, beta = surrogate_loss_and_grads(
            x, t, w, xhat, g_dt, g_tw, cfg, beta_grad_extra=beta_grad_extra
        )
        loss_trace.append(loss + refine_term)
        adam.step([grad_t, grad_w])
        # keep topic embeddings on the unit sphere: unconstrained norms let
        # theta sharpen by norm growth alone, which wrecks cluster geometry
        t[:] = _project_rows(t)

    # final forward pass with updated parameters
    _, _, theta, beta = surrogate_state(x, t, w, cfg)
    if c.empty_docs:
        theta[sorted(c.empty_docs)] = 1.0 / cfg.k
    if cfg.epochs == 0:
        loss_trace.append(recon_loss(xhat, theta, beta))

    model = TopicModel(T=t, W=w, config=cfg, vocab=list(c.vocab))
    final_words = [top_words(beta[k], c.vocab, refine_cfg.top_m) for k in range(cfg.k)]
    labels = [" ".join(ws[:2]).title() for ws in final_words]
    descriptions = ["Topic about: " + ", ".join(ws) for ws in final_words]
    if refiner is not None:
        try:
            suggestions = refiner.suggest_all(final_words, vocab_set)
        except Exception:
            suggestions = None
        if suggestions is not None:
            labels = [s.label or labels[k] for k, s in enumerate(suggestions)]
            descriptions = [
                refiner.describe(
                    labels[k], s.refined_words if s.refined_words else final_words[k]
                )
                for k, s in enumerate(suggestions)
            ]
    return FitResult(
        theta=theta,
        beta=beta,
        loss_trace=loss_trace,
        model=model,
        suggestions=suggestions,
        labels=labels,
        descriptions=descriptions,
    )


def transform(model: TopicModel, new_doc_emb: np.ndarray,
              empty_docs: set[int] | None = None) -> np.ndarray:
    """Proportions for unseen documents under the fitted topic embeddings."""
    if new_doc_emb.shape[1] != model.T.shape[1]:
        raise DimensionMismatch(
            f"embedding dim {new_doc_emb.shape[1]} != model dim {model.T.shape[1]}"
        )
    cfg = model.config
    return doc_topic(new_doc_emb, model.T, cfg.eps_dt,
                     max_iters=cfg.sinkhorn_iters, tol=cfg.sinkhorn_tol,
                     empty_docs=empty_docs)


CHECKPOINT_VERSION = 1


def save_model(model: TopicModel, doc_emb: DocEmbeddings, path: str,
               preprocess_cfg=None) -> None:
    """Persist T, W, config, vocab and the document projection as one .npz."""
    meta = {"version": CHECKPOINT_VERSION, "config": asdict(model.config)}
    if preprocess_cfg is not None:
        pp = asdict(preprocess_cfg)
        pp["stopwords"] = sorted(pp["stopwords"])
        meta["preprocess"] = pp
    np.savez(
        path,
        meta=json.dumps(meta),
        T=model.T,
        W=model.W,
        vocab=np.array(model.vocab, dtype=object),
        idf=doc_emb.idf if doc_emb.idf is not None else np.zeros(0),
        projection=doc_emb.projection if doc_emb.projection is not None else np.zeros((0, 0)),
    )


def load_model(path: str):
    """Load a checkpoint; returns (TopicModel, DocEmbeddings-state, preprocess dict)."""
    data = np.load(path, allow_pickle=True)
    meta = json.loads(str(data["meta"]))
    if meta.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
    cfg = ModelConfig(**meta["config"])
    vocab = [str(v) for v in data["vocab"]]
    model = TopicModel(T=data["T"], W=data["W"], config=cfg, vocab=vocab)
    emb_state = DocEmbeddings(
        matrix=np.zeros((0, cfg.h)),
        idf=data["idf"] if data["idf"].size else None,
        projection=data["projection"] if data["projection"].size else None,
    )
    return model, emb_state, meta.get("preprocess")
