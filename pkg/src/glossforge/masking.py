"""Lexical variants via masked-token substitution in sentence and gloss.

A sentence token is maskable only if it occurs verbatim in the gloss; that
co-occurrence is the only safe alignment criterion without a lexicon. The
mask placeholder literal is [MASK]. Candidate tokens come from a fill-mask
backend and are substituted at the masked sentence position and at every
aligned gloss position, so token-list lengths are preserved exactly.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

from . import GlossforgeError
from .backends import BackendError, FillMaskBackend
from .corpus import Corpus, SentenceGlossPair

log = logging.getLogger("glossforge.masking")

MASK = "[MASK]"


class MaskingError(GlossforgeError):
    pass


class NotAlignableError(MaskingError):
    pass


class NotMaskableError(MaskingError):
    pass


class DegenerateError(MaskingError):
    pass


@dataclass(frozen=True)
class MaskTemplate:
    source_pair_id: str
    sentence_tokens: tuple[str, ...]      # exactly one [MASK]
    gloss_mask_positions: tuple[int, ...]
    original_token: str
    gloss_tokens: tuple[str, ...]
    tense: str | None = None

    def __post_init__(self):
        if self.sentence_tokens.count(MASK) != 1:
            raise MaskingError("template must contain exactly one [MASK]")
        if not self.gloss_mask_positions:
            raise MaskingError("template has no aligned gloss positions")
        for pos in self.gloss_mask_positions:
            if not (0 <= pos < len(self.gloss_tokens)):
                raise MaskingError(f"gloss position {pos} out of range")
            if self.gloss_tokens[pos] != self.original_token:
                raise MaskingError(
                    f"gloss position {pos} holds {self.gloss_tokens[pos]!r}, "
                    f"not the masked token {self.original_token!r}"
                )

    @property
    def mask_index(self) -> int:
        return self.sentence_tokens.index(MASK)

    @property
    def masked_sentence(self) -> str:
        return " ".join(self.sentence_tokens)


def make_template(p: SentenceGlossPair, sentence_token_index: int,
                  stop_list: frozenset[str] | set[str] = frozenset()) -> MaskTemplate:
    """Mask one sentence token and record every aligned gloss position."""
    tokens = p.sentence.split()
    if not (0 <= sentence_token_index < len(tokens)):
        raise MaskingError(
            f"pair {p.id!r}: token index {sentence_token_index} out of range 0..{len(tokens) - 1}"
        )
    token = tokens[sentence_token_index]
    if token in stop_list:
        raise NotMaskableError(f"pair {p.id!r}: token {token!r} is stop-listed")
    positions = tuple(i for i, g in enumerate(p.gloss) if g == token)
    if not positions:
        raise NotAlignableError(f"pair {p.id!r}: token {token!r} does not occur in the gloss")
    masked = list(tokens)
    masked[sentence_token_index] = MASK
    return MaskTemplate(
        source_pair_id=p.id,
        sentence_tokens=tuple(masked),
        gloss_mask_positions=positions,
        original_token=token,
        gloss_tokens=p.gloss,
        tense=p.tense,
    )


def substitute(t: MaskTemplate, candidate: str) -> SentenceGlossPair:
    """Place a candidate at the mask and at every aligned gloss position."""
    if not candidate or any(ch.isspace() for ch in candidate):
        raise MaskingError(f"bad candidate token {candidate!r}")
    if candidate == t.original_token:
        raise DegenerateError(f"candidate equals the original token {candidate!r}")
    sent_tokens = [candidate if tok == MASK else tok for tok in t.sentence_tokens]
    gloss = list(t.gloss_tokens)
    for pos in t.gloss_mask_positions:
        gloss[pos] = candidate
    return SentenceGlossPair(
        id=f"{t.source_pair_id}-m{t.mask_index}-{candidate}",
        sentence=" ".join(sent_tokens),
        gloss=tuple(gloss),
        provenance="mask_subst",
        tense=t.tense,
        source_pair_id=t.source_pair_id,
        meta={"masked_token": t.original_token, "candidate": candidate},
    )


def pick_template(p: SentenceGlossPair,
                  stop_list: frozenset[str] | set[str] = frozenset()) -> MaskTemplate | None:
    """Best maskable position: longest token first (content-word proxy)."""
    tokens = p.sentence.split()
    order = sorted(range(len(tokens)), key=lambda i: (-len(tokens[i]), i))
    for i in order:
        try:
            return make_template(p, i, stop_list)
        except (NotAlignableError, NotMaskableError):
            continue
    return None


def batch_mask_augment(
    c: Corpus,
    backend: FillMaskBackend,
    per_pair_k: int,
    stop_list: frozenset[str] | set[str] = frozenset(),
) -> tuple[Corpus, dict]:
    """At most per_pair_k variants per eligible pair.

    Variants duplicating an existing or already-produced sentence are
    dropped; backend failures skip the pair and are counted, never fatal.
    """
    if per_pair_k < 1:
        raise MaskingError("per_pair_k must be >= 1")
    existing = {p.sentence for p in c.pairs}
    produced: list[SentenceGlossPair] = []
    report = {
        "produced": 0,
        "pairs_without_template": 0,
        "dropped_duplicates": 0,
        "degenerate_candidates": 0,
        "backend_failures": 0,
    }
    for p in c.pairs:
        template = pick_template(p, stop_list)
        if template is None:
            report["pairs_without_template"] += 1
            continue
        try:
            candidates = backend.candidates(template.masked_sentence, per_pair_k)
        except BackendError as exc:
            log.info("pair id=%s action=mask outcome=error reason=%s", p.id, exc)
            report["backend_failures"] += 1
            continue
        made = 0
        for token, _score in candidates:
            if made >= per_pair_k:
                break
            try:
                variant = substitute(template, token)
            except DegenerateError:
                report["degenerate_candidates"] += 1
                continue
            except MaskingError:
                continue
            if variant.sentence in existing:
                report["dropped_duplicates"] += 1
                continue
            existing.add(variant.sentence)
            produced.append(variant)
            made += 1
            log.info("pair id=%s action=mask outcome=ok candidate=%s", variant.id, token)
        report["produced"] += made
    return Corpus(tuple(produced)), report
