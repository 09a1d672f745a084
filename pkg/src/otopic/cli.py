"""Command-line pipeline: fit / sweep / eval / calibrate.

Settings resolve as flags > config file (TOML via --config) > defaults.
Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict

import numpy as np

from . import artifacts, calibrate as calib, metrics as met
from .corpus import (
    DEFAULT_MAX_BYTES,
    Corpus,
    PreprocessConfig,
    RawCorpus,
    corpus_stats,
    load_csv,
    preprocess,
    tokenize,
)
from .embed import (
    DEFAULT_EMBED_DIM,
    DEFAULT_PPMI_WINDOW,
    embed_documents_lsa,
    embed_new_documents,
    embed_words_ppmi,
    load_embeddings,
)
from .errors import MissingLabels, OtopicError
from .model import (
    ModelConfig,
    fit,
    load_model,
    save_model,
    top_words,
    topic_word,
    transform,
)
from .refine import LlmClient, LlmClientConfig, LlmRefiner, RefineConfig, StubRefiner
from .select import DEFAULT_K_GRID, sweep_k

from scipy import sparse


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML config file; flags override it")
    p.add_argument("--input", help="input CSV path")
    p.add_argument("--text-column", help="name of the text column")
    p.add_argument("--label-column", help="optional label column")
    p.add_argument("--max-input-bytes", type=int, default=DEFAULT_MAX_BYTES)
    p.add_argument("--min-df", type=int, default=2)
    p.add_argument("--max-df", type=float, default=0.95)
    p.add_argument("--stopwords-file", help="newline-separated stopword list")
    p.add_argument("--max-vocab", type=int)
    p.add_argument("--doc-embeddings", help="CSV of precomputed document embeddings")
    p.add_argument("--word-embeddings", help="CSV of precomputed word embeddings")
    p.add_argument("--embed-dim", type=int, default=DEFAULT_EMBED_DIM)
    p.add_argument("--ppmi-window", type=int, default=DEFAULT_PPMI_WINDOW)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--warmup", type=int, default=100)
    p.add_argument("--lr", type=float, default=2e-3)
    p.add_argument("--eps-dt", type=float, default=0.1)
    p.add_argument("--eps-tw", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--top-m", type=int, default=10)
    p.add_argument("--llm-endpoint", help="chat-completion endpoint URL")
    p.add_argument("--llm-model", default="llama3.1-8b")
    p.add_argument("--llm-concurrency", type=int, default=4)
    p.add_argument("--no-refine", action="store_true",
                   help="disable refinement (stub skip-mode)")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="refinement loss weight")
    p.add_argument("--refine-interval", type=int, default=20)
    p.add_argument("--no-calibrate", action="store_true")
    p.add_argument("--precision", type=int, default=3)
    p.add_argument("--output-dir", default=".")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otopic",
        description="Optimal-transport topic modeling with LLM-refined topic words",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="train with a fixed number of topics")
    _add_common_flags(p_fit)
    p_fit.add_argument("--k", type=int, help="number of topics")

    p_sweep = sub.add_parser("sweep", help="select K automatically by topic quality")
    _add_common_flags(p_sweep)
    p_sweep.add_argument("--k-grid", help='comma list, e.g. "10,20,50"')
    p_sweep.add_argument("--k-min", type=int)
    p_sweep.add_argument("--k-max", type=int)
    p_sweep.add_argument("--k-step", type=int, default=1)

    p_eval = sub.add_parser("eval", help="downstream evaluation of a fitted model")
    p_eval.add_argument("--config", help="TOML config file; flags override it")
    p_eval.add_argument("--model", required=True, help="model checkpoint (.npz)")
    p_eval.add_argument("--train", required=True, help="labeled training CSV")
    p_eval.add_argument("--test", required=True, help="labeled test CSV")
    p_eval.add_argument("--text-column", required=True)
    p_eval.add_argument("--label-column", required=True)
    p_eval.add_argument("--k-neighbors", type=int, default=5)
    p_eval.add_argument("--coherence-window", type=int, default=10)
    p_eval.add_argument("--top-m", type=int, default=10)
    p_eval.add_argument("--output", default="metrics.json")

    p_cal = sub.add_parser("calibrate", help="recalibrate a proportions CSV")
    p_cal.add_argument("--config", help="TOML config file; flags override it")
    p_cal.add_argument("--input", required=True, help="CSV of topic proportions")
    p_cal.add_argument("--output", required=True)
    p_cal.add_argument("--precision", type=int, default=3)
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    # two-phase parse so explicit flags override config-file values
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        with open(known.config, "rb") as fh:
            overrides = tomllib.load(fh)
        subparsers = parser._subparsers._group_actions[0]  # noqa: SLF001
        for action in subparsers.choices.values():
            valid = {a.dest for a in action._actions}  # noqa: SLF001
            action.set_defaults(**{k: v for k, v in overrides.items() if k in valid})
    return parser.parse_args(argv)


def _preprocess_config(args) -> PreprocessConfig:
    stop = None
    if args.stopwords_file:
        with open(args.stopwords_file, encoding="utf-8") as fh:
            stop = frozenset(w.strip() for w in fh if w.strip())
    cfg = PreprocessConfig(min_df=args.min_df, max_df_ratio=args.max_df,
                           max_vocab=args.max_vocab)
    if stop is not None:
        cfg.stopwords = stop
    return cfg


def _build_refiner(args, refine_cfg: RefineConfig):
    if args.llm_endpoint:
        client = LlmClient(LlmClientConfig(
            endpoint=args.llm_endpoint, model=args.llm_model,
        ))
        return LlmRefiner(client, refine_cfg)
    # offline: stub refiner; lam == 0 degenerates to skip mode so runs are
    # byte-identical with --no-refine
    return StubRefiner(skip=args.no_refine or args.lam == 0.0)


def _load_inputs(args) -> tuple[RawCorpus, Corpus]:
    if not args.input or not args.text_column:
        raise UsageError("--input and --text-column are required")
    stage = "load_csv"
    try:
        raw = load_csv(args.input, args.text_column, args.label_column,
                       max_bytes=args.max_input_bytes)
        stage = "preprocess"
        corpus = preprocess(raw, _preprocess_config(args))
    except OSError as exc:
        raise OtopicError(f"{stage}: {exc}") from exc
    except OtopicError as exc:
        raise OtopicError(f"{stage}: {exc}") from exc
    stats = corpus_stats(corpus)
    _log(f"corpus: N={stats.n_docs} V={stats.vocab_size} "
         f"avg_len={stats.avg_doc_length} empty={stats.n_empty_docs}")
    return raw, corpus


def _embeddings(args, corpus: Corpus):
    h = min(args.embed_dim, corpus.n_docs, corpus.vocab_size)
    if h < args.embed_dim:
        _log(f"embed dim reduced to {h} to fit min(N, V)")
    if args.doc_embeddings:
        doc_emb = load_embeddings(args.doc_embeddings, corpus.n_docs, kind="doc")
    else:
        doc_emb = embed_documents_lsa(corpus, h, seed=args.seed)
    if args.word_embeddings:
        word_emb = load_embeddings(args.word_embeddings, corpus.vocab_size, kind="word")
    else:
        word_emb = embed_words_ppmi(corpus, doc_emb.matrix.shape[1],
                                    window=args.ppmi_window, seed=args.seed)
    return doc_emb, word_emb


def _model_config(args, k: int, h: int) -> ModelConfig:
    return ModelConfig(
        k=k, h=h, eps_dt=args.eps_dt, eps_tw=args.eps_tw,
        epochs=args.epochs, warmup_epochs=min(args.warmup, args.epochs),
        lr=args.lr, seed=args.seed, top_m=args.top_m,
    )


def _write_outputs(args, raw, corpus, result, sweep_report=None) -> None:
    out = args.output_dir
    os.makedirs(out, exist_ok=True)
    theta = result.theta
    fallback_note = ""
    if not args.no_calibrate:
        calibrated = calib.calibrate(theta)
        theta = calibrated.matrix
        fallback_note = f" fallback_rows={len(calibrated.fallback_rows)}"
    labels = artifacts.dedupe_labels(result.labels)
    artifacts.write_proportions_csv(
        theta, labels, os.path.join(out, artifacts.PROPORTIONS_FILE),
        original_texts=raw.texts, precision=args.precision,
    )
    artifacts.write_topics_jsonl(
        result.beta, corpus.vocab, labels, result.descriptions,
        os.path.join(out, artifacts.TOPICS_FILE), top_m=args.top_m,
        refined=result.suggestions,
    )
    if sweep_report is not None:
        artifacts.write_k_report_txt(
            sweep_report, os.path.join(out, artifacts.K_REPORT_FILE))
    config_snapshot = {k: v for k, v in vars(args).items() if k != "command"}
    artifacts.write_manifest(os.path.join(out, artifacts.MANIFEST_FILE),
                             seed=args.seed, config=config_snapshot)
    _log(f"outputs written to {out}{fallback_note}")


class UsageError(Exception):
    pass


def cmd_fit(args) -> int:
    if args.k is None:
        raise UsageError("--k is required for fit")
    raw, corpus = _load_inputs(args)
    doc_emb, word_emb = _embeddings(args, corpus)
    cfg = _model_config(args, args.k, doc_emb.matrix.shape[1])
    refine_cfg = RefineConfig(lam=args.lam, interval_epochs=args.refine_interval,
                              top_m=args.top_m,
                              concurrency_limit=args.llm_concurrency)
    refiner = _build_refiner(args, refine_cfg)
    _log(f"fitting K={cfg.k} for {cfg.epochs} epochs (seed {cfg.seed})")
    result = fit(corpus, doc_emb, word_emb, cfg, refiner=refiner,
                 refine_cfg=refine_cfg)
    os.makedirs(args.output_dir, exist_ok=True)
    save_model(result.model, doc_emb, os.path.join(args.output_dir, "model.npz"),
               preprocess_cfg=_preprocess_config(args))
    _write_outputs(args, raw, corpus, result)
    return 0


def _parse_grid(args, n_docs: int) -> list[int]:
    if args.k_grid:
        try:
            return [int(x) for x in args.k_grid.split(",") if x.strip()]
        except ValueError as exc:
            raise UsageError(f"bad --k-grid: {exc}") from exc
    if args.k_min is not None and args.k_max is not None:
        return list(range(args.k_min, args.k_max + 1, args.k_step))
    return [k for k in DEFAULT_K_GRID if k <= n_docs] or [2]


def cmd_sweep(args) -> int:
    raw, corpus = _load_inputs(args)
    doc_emb, word_emb = _embeddings(args, corpus)
    grid = _parse_grid(args, corpus.n_docs)
    cfg = _model_config(args, max(2, grid[0]), doc_emb.matrix.shape[1])
    refine_cfg = RefineConfig(lam=args.lam, interval_epochs=args.refine_interval,
                              top_m=args.top_m,
                              concurrency_limit=args.llm_concurrency)
    refiner = _build_refiner(args, refine_cfg)
    _log(f"sweeping K over {grid}")
    report, fits = sweep_k(corpus, doc_emb, word_emb, grid, cfg,
                           refiner=refiner, refine_cfg=refine_cfg,
                           top_n=args.top_m, keep_fits=True)
    for row in report.rows:
        if row.failed:
            _log(f"  K={row.k}: failed")
        else:
            _log(f"  K={row.k}: TQ={row.tq:.4f} ({row.wall_seconds:.1f}s)")
    _log(f"chosen K={report.chosen_k}")
    result = fits[report.chosen_k]
    os.makedirs(args.output_dir, exist_ok=True)
    save_model(result.model, doc_emb, os.path.join(args.output_dir, "model.npz"),
               preprocess_cfg=_preprocess_config(args))
    _write_outputs(args, raw, corpus, result, sweep_report=report)
    return 0


def _corpus_on_vocab(path: str, text_column: str, label_column: str,
                     pp: dict, vocab: list[str]) -> tuple[Corpus, list[str]]:
    raw = load_csv(path, text_column, label_column)
    if raw.labels is None:
        raise MissingLabels(f"{path}: no label column {label_column!r}")
    cfg = PreprocessConfig(
        lowercase=pp.get("lowercase", True),
        min_token_len=pp.get("min_token_len", 2),
        stopwords=frozenset(pp.get("stopwords", [])),
    )
    word_id = {w: i for i, w in enumerate(vocab)}
    docs, rows, cols, vals = [], [], [], []
    empty: set[int] = set()
    for i, text in enumerate(raw.texts):
        ids = [word_id[t] for t in tokenize(text, cfg) if t in word_id]
        docs.append(ids)
        if not ids:
            empty.add(i)
            continue
        from collections import Counter

        counts = Counter(ids)
        rows.extend([i] * len(counts))
        cols.extend(counts.keys())
        vals.extend(counts.values())
    bow = sparse.csr_matrix((vals, (rows, cols)),
                            shape=(len(raw.texts), len(vocab)), dtype=np.int64)
    return Corpus(docs=docs, vocab=list(vocab), bow=bow, labels=raw.labels,
                  empty_docs=empty), raw.labels


def cmd_eval(args) -> int:
    model, emb_state, pp = load_model(args.model)
    pp = pp or {}
    train, y_train = _corpus_on_vocab(args.train, args.text_column,
                                      args.label_column, pp, model.vocab)
    test, y_test = _corpus_on_vocab(args.test, args.text_column,
                                    args.label_column, pp, model.vocab)
    theta_train = transform(model, embed_new_documents(train.bow, emb_state),
                            empty_docs=train.empty_docs)
    theta_test = transform(model, embed_new_documents(test.bow, emb_state),
                           empty_docs=test.empty_docs)

    cfg = model.config
    beta = topic_word(model.T, model.W, cfg.eps_tw,
                      max_iters=cfg.sinkhorn_iters, tol=cfg.sinkhorn_tol)
    topics = [top_words(beta[k], model.vocab, args.top_m) for k in range(cfg.k)]
    tc_per, tc = met.npmi_coherence(topics, train, window=args.coherence_window)
    td = met.topic_diversity(topics, n=args.top_m)
    purity, nmi, pn = met.cluster_eval(theta_test, y_test)
    acc = met.classify_eval(theta_train, y_train, theta_test, y_test,
                            k_neighbors=args.k_neighbors)
    report = met.MetricsReport(
        tc_per_topic=tc_per, tc_mean=tc, td=td, tq=met.topic_quality(tc, td),
        purity=purity, nmi=nmi, pn=pn, acc=acc,
    )
    payload = json.dumps(asdict(report), indent=2)
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write(payload + "\n")
    print(payload)
    return 0


def cmd_calibrate(args) -> int:
    with open(args.input, encoding="utf-8") as fh:
        import csv as _csv

        reader = _csv.reader(fh)
        header = next(reader)
        data_rows = list(reader)
    has_text = header and header[0] == "text"
    start = 1 if has_text else 0
    theta = np.array([[float(v) for v in row[start:]] for row in data_rows])
    sums = theta.sum(axis=1, keepdims=True)
    theta = np.divide(theta, sums, out=np.full_like(theta, 1.0 / theta.shape[1]),
                      where=sums > 0)
    calibrated = calib.calibrate(theta)
    texts = [row[0] for row in data_rows] if has_text else None
    artifacts.write_proportions_csv(calibrated.matrix, header[start:], args.output,
                                    original_texts=texts, precision=args.precision)
    _log(f"calibrated {theta.shape[0]} rows "
         f"({len(calibrated.fallback_rows)} uniform fallbacks)")
    return 0


COMMANDS = {"fit": cmd_fit, "sweep": cmd_sweep, "eval": cmd_eval,
            "calibrate": cmd_calibrate}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config_file(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    except OtopicError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error ({args.command}): {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
