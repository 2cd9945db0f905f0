"""Command-line entry point orchestrating the augmentation pipeline.

Exit codes: 0 success, 2 config error, 3 backend error, 4 data error.
Failures print a machine-readable JSON summary to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import GlossforgeError
from .backends import (
    BackendError,
    GenerationParams,
    HttpChatBackend,
    HttpEmbedderBackend,
    HttpFillMaskBackend,
    MockChatBackend,
    MockFillMaskBackend,
    TokenHashEmbedder,
)
from .bleu import evaluate_files, render_bleu, run_external_scorer
from .config import ConfigError, PipelineConfig
from .corpus import Corpus, SplitRatios, dedupe, load_corpus, split_corpus, write_corpus
from .masking import batch_mask_augment
from .promptgen import TemplateSet, batch_augment
from .retrieval import RetrievalConfig, build_index, save_index
from .rules import RuleSet, UnknownTenseError, expand_pair, load_rules
from .review_service import ReviewStore, serve_review
from .validation import build_report, read_journal, render_report, sample_for_review

log = logging.getLogger("glossforge.cli")


def _round_half_up(x: float) -> int:
    return int(x + 0.5)


def _read_stoplist(path: str | None) -> frozenset[str]:
    if not path:
        return frozenset()
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return frozenset(t.strip() for t in lines if t.strip())


def _read_sentences(path: str | Path) -> list[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [ln.strip() for ln in lines if ln.strip()]


def _embedder(mode: str, dim: int, url: str | None):
    if mode == "mock":
        return TokenHashEmbedder(dimension=dim)
    url = url or os.environ.get("GLOSSFORGE_EMBED_URL")
    if not url:
        raise ConfigError("missing config key 'backends.embed_url' (or GLOSSFORGE_EMBED_URL)")
    return HttpEmbedderBackend(url, dimension=dim)


def _llm(mode: str, url: str | None, key: str | None, rs: RuleSet | None):
    if mode == "mock":
        return MockChatBackend(ruleset=rs)
    url = url or os.environ.get("GLOSSFORGE_LLM_URL")
    if not url:
        raise ConfigError("missing config key 'backends.llm_url' (or GLOSSFORGE_LLM_URL)")
    return HttpChatBackend(url, api_key=key or os.environ.get("GLOSSFORGE_LLM_KEY"))


def _fillmask(mode: str, url: str | None):
    if mode == "mock":
        return MockFillMaskBackend()
    url = url or os.environ.get("GLOSSFORGE_FILLMASK_URL")
    if not url:
        raise ConfigError("missing config key 'backends.fillmask_url' (or GLOSSFORGE_FILLMASK_URL)")
    return HttpFillMaskBackend(url)


# ---------------------------------------------------------------------------
# subcommands

def cmd_split(args) -> int:
    corpus = load_corpus(args.corpus)
    ratios = SplitRatios(train=args.train, dev=args.dev, test=args.test, seed=args.seed)
    corpus = split_corpus(corpus, ratios, overwrite=args.overwrite)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sizes = {}
    for cls in ("train", "dev", "test"):
        subset = corpus.subset(cls)
        write_corpus(subset, out / f"{cls}.jsonl")
        sizes[cls] = len(subset)
    print(json.dumps({"sizes": sizes, "seed": args.seed}))
    return 0


def cmd_rules_expand(args) -> int:
    corpus = load_corpus(args.corpus)
    rs = load_rules(args.rules)
    log.info("loaded %d rules, %d detection rules", len(rs.rules), len(rs.detection_rules))
    expanded = []
    skipped_unknown = 0
    for p in corpus:
        if args.target is not None and len(expanded) >= args.target:
            break
        try:
            outputs = expand_pair(p, rs)
        except UnknownTenseError:
            skipped_unknown += 1
            continue
        for q in outputs:
            if args.target is not None and len(expanded) >= args.target:
                break
            expanded.append(q)
            log.info("pair id=%s action=rule_tense outcome=ok", q.id)
    write_corpus(Corpus(tuple(expanded)), args.out)
    print(json.dumps({"produced": len(expanded), "skipped_unknown_tense": skipped_unknown}))
    return 0


def cmd_mask_augment(args) -> int:
    corpus = load_corpus(args.corpus)
    backend = _fillmask(args.mode, args.fillmask_url)
    stop = _read_stoplist(args.stoplist)
    variants, report = batch_mask_augment(corpus, backend, per_pair_k=args.k, stop_list=stop)
    pairs = variants.pairs[: args.target] if args.target is not None else variants.pairs
    write_corpus(Corpus(pairs), args.out)
    report["written"] = len(pairs)
    print(json.dumps(report))
    return 0


def cmd_index_build(args) -> int:
    corpus = load_corpus(args.corpus)
    backend = _embedder(args.mode, args.dim, args.embed_url)
    idx = build_index(corpus, backend, batch_size=args.batch_size)
    save_index(idx, args.out)
    print(json.dumps({"entries": len(idx), "dim": idx.dimension, "backend": idx.backend_name}))
    return 0


def cmd_rag_augment(args) -> int:
    from .retrieval import load_index

    train = load_corpus(args.train)
    rs = load_rules(args.rules)
    embedder = _embedder(args.mode, args.dim, args.embed_url)
    idx = load_index(args.index, expect_backend=embedder.name)
    llm = _llm(args.mode, args.llm_url, args.llm_key, rs)
    templates = TemplateSet.load_dir(args.prompts_dir) if args.prompts_dir else None
    params = GenerationParams(model_id=args.model)
    cfg = RetrievalConfig(threshold=args.threshold, cap=args.cap, min_examples=args.min_examples)
    sources = _read_sentences(args.sources)
    if args.limit is not None:
        sources = sources[: args.limit]
    generated, errors = batch_augment(
        sources, idx, rs, llm, embedder, cfg, pairs_by_id=train.by_id(),
        concurrency=args.concurrency, journal_path=args.journal,
        templates=templates, params=params,
    )
    write_corpus(generated, args.out)
    print(json.dumps({"produced": len(generated), "errors": len(errors)}))
    if errors:
        log.warning("rag errors: %s", json.dumps(errors[:10], ensure_ascii=False))
    return 0


def cmd_review_sample(args) -> int:
    corpus = load_corpus(args.corpus)
    ids = sample_for_review(corpus, args.fraction, args.seed)
    by_id = corpus.by_id()
    sampled = Corpus(tuple(by_id[i] for i in ids))
    write_corpus(sampled, args.out)
    print(json.dumps({"sampled": len(ids), "fraction": args.fraction, "seed": args.seed}))
    return 0


def cmd_review_serve(args) -> int:
    samples = load_corpus(args.samples)
    store = ReviewStore(list(samples.pairs), args.journal, quality_weighting=args.weighting)
    server = serve_review(store, host=args.host, port=args.port, ui_dir=args.ui_dir)
    host, port = server.server_address[:2]
    print(f"review service listening on http://{host}:{port}/", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def cmd_kappa_report(args) -> int:
    records = read_journal(args.journal)
    report = build_report(records, quality_weighting=args.weighting)
    if args.json:
        print(json.dumps(report.to_json_obj(), ensure_ascii=False, indent=2))
    else:
        print(render_report(report), end="")
    return 0


def cmd_eval(args) -> int:
    components, per_example = evaluate_files(args.hyp, args.ref, format=args.format,
                                             max_n=args.max_n)
    print(render_bleu(components), end="")
    if args.per_example:
        for entry in per_example:
            print(json.dumps(entry, ensure_ascii=False))
    if args.comet_cmd:
        _, system = run_external_scorer(args.comet_cmd, args.hyp, args.ref)
        print(f"COMET system: {system}")
    return 0


def cmd_pipeline(args) -> int:
    cfg = PipelineConfig.load(args.config)
    out = Path(args.out_dir or cfg.get("output.dir"))
    out.mkdir(parents=True, exist_ok=True)

    corpus = load_corpus(cfg.get_path("corpus.manual"))
    n_manual = len(corpus)
    ratios = SplitRatios(
        train=cfg.get_float("split.train"),
        dev=cfg.get_float("split.dev"),
        test=cfg.get_float("split.test"),
        seed=cfg.get_int("split.seed"),
    )
    corpus = split_corpus(corpus, ratios)
    split_sizes = {}
    for cls in ("train", "dev", "test"):
        subset = corpus.subset(cls)
        write_corpus(subset, out / f"{cls}.jsonl")
        split_sizes[cls] = len(subset)
    train = corpus.subset("train")
    log.info("split sizes: %s", split_sizes)

    rs = load_rules(cfg.get_path("rules.path"))
    mode = cfg.get("backends.mode")
    if mode not in ("mock", "http"):
        raise ConfigError(f"backends.mode must be mock or http, got {mode!r}")
    embedder = _embedder(mode, cfg.get_int("retrieval.dim"), cfg.get_optional("backends.embed_url"))
    idx = build_index(train, embedder)
    save_index(idx, out / "train.index")
    log.info("index built: %d entries", len(idx))

    # rule-based expansion, capped at its share of the manual count
    rule_target = _round_half_up(n_manual * cfg.get_float("pipeline.rule_ratio"))
    rule_pairs = []
    for p in train:
        if len(rule_pairs) >= rule_target:
            break
        try:
            outputs = expand_pair(p, rs)
        except UnknownTenseError:
            continue
        rule_pairs.extend(outputs[: rule_target - len(rule_pairs)])
    write_corpus(Corpus(tuple(rule_pairs)), out / "rule_tense.jsonl")

    mask_target = _round_half_up(n_manual * cfg.get_float("pipeline.mask_ratio"))
    fillmask = _fillmask(mode, cfg.get_optional("backends.fillmask_url"))
    stoplist_path = cfg.get_optional("masking.stoplist")
    stop = _read_stoplist(str(cfg.get_path("masking.stoplist")) if stoplist_path else None)
    mask_corpus, mask_report = batch_mask_augment(
        train, fillmask, per_pair_k=cfg.get_int("masking.k"), stop_list=stop
    )
    mask_pairs = mask_corpus.pairs[:mask_target]
    write_corpus(Corpus(mask_pairs), out / "mask_subst.jsonl")

    rag_target = _round_half_up(n_manual * cfg.get_float("pipeline.rag_ratio"))
    sources = _read_sentences(cfg.get_path("corpus.external"))[:rag_target]
    if len(sources) < rag_target:
        log.warning("external corpus has %d sentences, target was %d", len(sources), rag_target)
    llm = _llm(mode, cfg.get_optional("backends.llm_url"), cfg.llm_key(), rs)
    templates = (
        TemplateSet.load_dir(cfg.get_path("prompts.dir"))
        if cfg.get_optional("prompts.dir")
        else None
    )
    rcfg = RetrievalConfig(
        threshold=cfg.get_float("retrieval.threshold"),
        cap=cfg.get_int("retrieval.cap"),
        min_examples=cfg.get_int("retrieval.min_examples"),
        metric=cfg.get("retrieval.metric"),
    )
    rag_corpus, rag_errors = batch_augment(
        sources, idx, rs, llm, embedder, rcfg, pairs_by_id=train.by_id(),
        concurrency=cfg.get_int("pipeline.concurrency"),
        journal_path=out / "rag_journal.jsonl",
        templates=templates,
        params=GenerationParams(model_id=cfg.get("backends.llm_model")),
    )
    write_corpus(rag_corpus, out / "rag.jsonl")

    merged = Corpus(corpus.pairs + tuple(rule_pairs) + tuple(mask_pairs) + rag_corpus.pairs)
    merged.validate_references()
    merged, removed = dedupe(merged)
    write_corpus(merged, out / "merged.jsonl")

    counts = {prov: 0 for prov in ("manual", "rule_tense", "mask_subst", "rag")}
    for p in merged:
        counts[p.provenance] += 1
    augmented = len(merged) - counts["manual"]
    manifest = {
        "counts": {**counts, "total": len(merged)},
        "augmented_total": augmented,
        "manual_to_augmented_ratio": round(augmented / counts["manual"], 2),
        "split_sizes": split_sizes,
        "dedupe_removed": removed,
        "rag_errors": len(rag_errors),
        "mask_report": mask_report,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(manifest["counts"]))
    return 0


# ---------------------------------------------------------------------------
# argument parsing

def _add_backend_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=("mock", "http"), default="mock",
                   help="backend mode (mock backends run fully offline)")
    p.add_argument("--llm-url", default=None)
    p.add_argument("--llm-key", default=None)
    p.add_argument("--embed-url", default=None)
    p.add_argument("--fillmask-url", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glossforge",
                                     description="Sentence-gloss corpus augmentation toolkit")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="deterministic train/dev/test split")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--train", type=float, default=0.8)
    p.add_argument("--dev", type=float, default=0.1)
    p.add_argument("--test", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--overwrite", action="store_true")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("rules-expand", help="tense-rule augmentation")
    p.add_argument("--corpus", required=True)
    p.add_argument("--rules", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--target", type=int, default=None)
    p.set_defaults(func=cmd_rules_expand)

    p = sub.add_parser("mask-augment", help="masked-token substitution augmentation")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=1, help="variants per pair")
    p.add_argument("--stoplist", default=None)
    p.add_argument("--target", type=int, default=None)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_mask_augment)

    p = sub.add_parser("index-build", help="embed a training corpus into an index file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--batch-size", type=int, default=32)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_index_build)

    p = sub.add_parser("rag-augment", help="retrieval-grounded two-stage generation")
    p.add_argument("--index", required=True)
    p.add_argument("--rules", required=True)
    p.add_argument("--train", required=True, help="training corpus (gloss text for examples)")
    p.add_argument("--sources", required=True, help="file with one source sentence per line")
    p.add_argument("--out", required=True)
    p.add_argument("--journal", default=None, help="resume journal path")
    p.add_argument("--concurrency", type=int, default=4)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--cap", type=int, default=20)
    p.add_argument("--min-examples", type=int, default=3)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--model", default="mock")
    p.add_argument("--prompts-dir", default=None)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_rag_augment)

    p = sub.add_parser("review-sample", help="sample pairs for expert review")
    p.add_argument("--corpus", required=True)
    p.add_argument("--fraction", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_review_sample)

    p = sub.add_parser("review-serve", help="run the dual-rater review service")
    p.add_argument("--samples", required=True, help="sampled corpus JSONL (review order)")
    p.add_argument("--journal", required=True, help="annotation journal JSONL (appended)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--ui-dir", default=None, help="serve the static review UI from this dir")
    p.add_argument("--weighting", choices=("none", "linear", "quadratic"), default="none")
    p.set_defaults(func=cmd_review_serve)

    p = sub.add_parser("kappa-report", help="agreement report from an annotation journal")
    p.add_argument("--journal", required=True)
    p.add_argument("--weighting", choices=("none", "linear", "quadratic"), default="none")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_kappa_report)

    p = sub.add_parser("eval", help="corpus-level BLEU between gloss files")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--format", choices=("text", "jsonl"), default="text")
    p.add_argument("--max-n", type=int, default=4)
    p.add_argument("--per-example", action="store_true")
    p.add_argument("--comet-cmd", default=None,
                   help="external scorer invoked as '<cmd> <hyp> <ref>'")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline",
                       help="split -> index -> three augmentations -> merge -> dedupe")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=None, help="override output.dir")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return 2
    except BackendError as exc:
        print(json.dumps({"error": "backend", "message": str(exc)}), file=sys.stderr)
        return 3
    except GlossforgeError as exc:
        print(json.dumps({"error": "data", "message": str(exc)}), file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
