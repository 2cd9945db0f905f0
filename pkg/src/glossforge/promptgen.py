"""Two-stage prompt construction and generation orchestration.

Stage 1 asks the chat backend for the sentence's tense; stage 2 asks for the
gloss, grounded either in retrieved examples (few_shot) or, when retrieval
comes back too thin, in the tense rules (rule_fallback). Prompt wording
lives in editable template files with {{sentence}}, {{examples}}, {{rules}}
and {{tense}} placeholders; rendering is pinned by golden tests.
"""
from __future__ import annotations

import hashlib
import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import GlossforgeError
from .backends import EmbedderBackend, GenerationParams, LlmBackend
from .corpus import Corpus, SentenceGlossPair, nfc
from .retrieval import EmbeddingIndex, RetrievalConfig, RetrievalResult, query_index
from .rules import RuleSet

log = logging.getLogger("glossforge.promptgen")

TEMPLATE_NAMES = (
    "tense_system", "tense_user", "gloss_system",
    "gloss_fewshot_user", "gloss_fallback_user",
)

_TENSE_KEYWORD_RE = re.compile(
    r"present[ _-]continuous|past[ _-]continuous|present|past|future|unknown",
    re.IGNORECASE,
)


class PromptError(GlossforgeError):
    pass


class EmptyGenerationError(PromptError):
    pass


def render_template(template: str, **values: str) -> str:
    out = template
    for key, val in values.items():
        out = out.replace("{{" + key + "}}", val)
    if leftover := re.search(r"\{\{(\w+)\}\}", out):
        raise PromptError(f"unfilled placeholder {{{{{leftover.group(1)}}}}}")
    return out


@dataclass(frozen=True)
class TemplateSet:
    tense_system: str
    tense_user: str
    gloss_system: str
    gloss_fewshot_user: str
    gloss_fallback_user: str

    @classmethod
    def load_default(cls) -> "TemplateSet":
        pkg = resources.files("glossforge") / "templates"
        return cls(**{n: (pkg / f"{n}.txt").read_text(encoding="utf-8") for n in TEMPLATE_NAMES})

    @classmethod
    def load_dir(cls, path: str | Path) -> "TemplateSet":
        path = Path(path)
        texts = {}
        for n in TEMPLATE_NAMES:
            f = path / f"{n}.txt"
            if not f.exists():
                raise PromptError(f"missing template file {f}")
            texts[n] = f.read_text(encoding="utf-8")
        return cls(**texts)


@dataclass(frozen=True)
class PromptBundle:
    stage: str                  # tense_id | gloss_gen
    mode: str | None            # few_shot | rule_fallback; None for tense_id
    system: str
    user: str
    included_example_ids: tuple[str, ...] = ()
    included_rule_ids: tuple[str, ...] = ()


def build_tense_prompt(sentence: str, templates: TemplateSet | None = None) -> PromptBundle:
    if not sentence.strip():
        raise PromptError("cannot build a tense prompt for an empty sentence")
    t = templates or TemplateSet.load_default()
    return PromptBundle(
        stage="tense_id",
        mode=None,
        system=t.tense_system,
        user=render_template(t.tense_user, sentence=nfc(sentence)),
    )


def parse_tense_response(text: str) -> str:
    """First recognized tense keyword, case-insensitive; none -> unknown."""
    m = _TENSE_KEYWORD_RE.search(text)
    if not m:
        return "unknown"
    return re.sub(r"[ -]", "_", m.group(0).lower())


def _render_examples(match_ids: list[str], pairs_by_id: dict[str, SentenceGlossPair]) -> str:
    lines = []
    for pid in match_ids:
        p = pairs_by_id[pid]
        lines.append(f"{p.sentence} => {' '.join(p.gloss)}")
    return "\n".join(lines)


def _render_rules(rules) -> str:
    lines = []
    for r in rules:
        lines.append(
            f'{r.rule_id}: {r.source_tense} -> {r.target_tense}: '
            f'verb suffix "{r.sentence_suffix_match}" rewrites to "{r.sentence_rewrite}", '
            f'gloss tail becomes "{r.gloss_rewrite}"'
        )
    return "\n".join(lines)


def build_gloss_prompt(
    sentence: str,
    rr: RetrievalResult,
    rs: RuleSet,
    tense: str,
    pairs_by_id: dict[str, SentenceGlossPair] | None = None,
    templates: TemplateSet | None = None,
) -> PromptBundle:
    """Stage-2 bundle: few_shot from the matches, or rule_fallback with the
    detected tense's rules (all rules when the tense is unknown)."""
    t = templates or TemplateSet.load_default()
    sentence = nfc(sentence)
    if not rr.fallback_needed:
        if pairs_by_id is None:
            raise PromptError("few-shot prompts need the training pairs for gloss text")
        ids = [pid for pid, _ in rr.matches]
        missing = [pid for pid in ids if pid not in pairs_by_id]
        if missing:
            raise PromptError(f"retrieved ids missing from training pairs: {missing[:5]}")
        return PromptBundle(
            stage="gloss_gen",
            mode="few_shot",
            system=t.gloss_system,
            user=render_template(
                t.gloss_fewshot_user,
                examples=_render_examples(ids, pairs_by_id),
                tense=tense,
                sentence=sentence,
            ),
            included_example_ids=tuple(ids),
        )
    rules = rs.rules if tense == "unknown" else rs.rules_for_tense(tense)
    return PromptBundle(
        stage="gloss_gen",
        mode="rule_fallback",
        system=t.gloss_system,
        user=render_template(
            t.gloss_fallback_user,
            rules=_render_rules(rules),
            tense=tense,
            sentence=sentence,
        ),
        included_rule_ids=tuple(r.rule_id for r in rules),
    )


def parse_gloss_response(text: str) -> tuple[str, ...]:
    """Last non-empty line, whitespace-split; robust to chatty models."""
    for line in reversed(text.splitlines()):
        tokens = tuple(nfc(line).split())
        if tokens:
            return tokens
    raise EmptyGenerationError("backend returned no gloss tokens")


def exclude_self_matches(rr: RetrievalResult, idx: EmbeddingIndex, sentence: str,
                         cfg: RetrievalConfig) -> RetrievalResult:
    """Drop matches whose stored text equals the query (score-1.0 leakage)."""
    target = nfc(sentence)
    text_by_id = dict(zip(idx.ids, idx.texts))
    kept = [(pid, s) for pid, s in rr.matches if text_by_id.get(pid) != target]
    if len(kept) == len(rr.matches):
        return rr
    return RetrievalResult.from_matches(kept, cfg)


def deterministic_pair_id(sentence: str) -> str:
    return "rag-" + hashlib.sha1(nfc(sentence).encode("utf-8")).hexdigest()[:12]


def generate_gloss(
    sentence: str,
    idx: EmbeddingIndex,
    rs: RuleSet,
    llm: LlmBackend,
    embedder: EmbedderBackend,
    cfg: RetrievalConfig,
    pairs_by_id: dict[str, SentenceGlossPair],
    templates: TemplateSet | None = None,
    params: GenerationParams | None = None,
    pair_id: str | None = None,
) -> SentenceGlossPair:
    """Run both stages for one sentence and assemble the generated pair.

    The pair carries provenance "rag", the stage-1 tense, and meta recording
    the prompt mode, match count and model id. In few_shot mode the top
    match becomes source_pair_id; fallback pairs have none.
    """
    templates = templates or TemplateSet.load_default()
    params = params or GenerationParams()
    sentence = nfc(sentence)

    tense_bundle = build_tense_prompt(sentence, templates)
    tense = parse_tense_response(llm.complete(tense_bundle.system, tense_bundle.user, params))

    rr = query_index(idx, sentence, cfg, embedder)
    rr = exclude_self_matches(rr, idx, sentence, cfg)
    bundle = build_gloss_prompt(sentence, rr, rs, tense, pairs_by_id, templates)
    gloss = parse_gloss_response(llm.complete(bundle.system, bundle.user, params))

    source_id = rr.matches[0][0] if bundle.mode == "few_shot" else None
    return SentenceGlossPair(
        id=pair_id or deterministic_pair_id(sentence),
        sentence=sentence,
        gloss=gloss,
        provenance="rag",
        tense=tense,
        source_pair_id=source_id,
        meta={
            "mode": bundle.mode,
            "match_count": str(len(rr.matches)),
            "model_id": params.model_id,
        },
    )


def _read_resume_journal(path: Path) -> dict[str, SentenceGlossPair]:
    done: dict[str, SentenceGlossPair] = {}
    if not path.exists():
        return done
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            if obj.get("status") == "ok":
                done[obj["id"]] = SentenceGlossPair.from_json_obj(obj["pair"])
    return done


def batch_augment(
    sources: list[str],
    idx: EmbeddingIndex,
    rs: RuleSet,
    llm: LlmBackend,
    embedder: EmbedderBackend,
    cfg: RetrievalConfig,
    pairs_by_id: dict[str, SentenceGlossPair],
    concurrency: int = 1,
    journal_path: str | Path | None = None,
    templates: TemplateSet | None = None,
    params: GenerationParams | None = None,
) -> tuple[Corpus, list[dict]]:
    """Generate a pair per source sentence under a bounded worker pool.

    Output order follows input order regardless of concurrency. Failures are
    skipped and reported, never fatal. With a journal path, each finished
    item is appended as it completes (single writer) and a rerun skips
    sentences already journaled as ok; failed ones are retried.
    """
    if not sources:
        raise PromptError("no source sentences to augment")
    templates = templates or TemplateSet.load_default()
    params = params or GenerationParams()
    journal = Path(journal_path) if journal_path else None
    done = _read_resume_journal(journal) if journal else {}

    jobs: list[tuple[int, str, str]] = []   # position, pair id, sentence
    results: dict[int, SentenceGlossPair] = {}
    report: list[dict] = []
    seen_ids: set[str] = set()
    for pos, raw in enumerate(sources):
        sentence = nfc(raw)
        pid = deterministic_pair_id(sentence)
        if pid in seen_ids:
            report.append({"position": pos, "sentence": sentence,
                           "error": "duplicate source sentence"})
            continue
        seen_ids.add(pid)
        if pid in done:
            results[pos] = done[pid]
            continue
        jobs.append((pos, pid, sentence))

    def run(job: tuple[int, str, str]) -> tuple[int, str, str, SentenceGlossPair]:
        pos, pid, sentence = job
        pair = generate_gloss(sentence, idx, rs, llm, embedder, cfg, pairs_by_id,
                              templates, params, pair_id=pid)
        return pos, pid, sentence, pair

    journal_fh = open(journal, "a", encoding="utf-8", newline="\n") if journal else None
    try:
        with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
            futures = {pool.submit(run, job): job for job in jobs}
            for fut in as_completed(futures):
                pos, pid, sentence = futures[fut]
                try:
                    _, _, _, pair = fut.result()
                except GlossforgeError as exc:
                    log.info("pair id=%s action=rag outcome=error reason=%s", pid, exc)
                    report.append({"position": pos, "sentence": sentence, "error": str(exc)})
                    if journal_fh:
                        journal_fh.write(json.dumps(
                            {"id": pid, "status": "error", "reason": str(exc)},
                            ensure_ascii=False) + "\n")
                        journal_fh.flush()
                    continue
                results[pos] = pair
                log.info("pair id=%s action=rag outcome=ok mode=%s", pid, pair.meta.get("mode"))
                if journal_fh:
                    journal_fh.write(json.dumps(
                        {"id": pid, "status": "ok", "pair": pair.to_json_obj()},
                        ensure_ascii=False) + "\n")
                    journal_fh.flush()
    finally:
        if journal_fh:
            journal_fh.close()

    ordered = [results[pos] for pos in sorted(results)]
    report.sort(key=lambda e: e["position"])
    return Corpus(tuple(ordered)), report
