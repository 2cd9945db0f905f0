"""Declarative tense-transformation rules over sentence-gloss pairs.

Rule files are line-oriented UTF-8:

    version 1
    # comment
    detect <suffix> -> <tense>
    rule <id> <src-tense> -> <dst-tense> : verb "<suffix>" => "<template>" ; gloss => "<template>"

Templates use the literal placeholder ROOT. The verb is assumed to be the
final sentence token (Bangla is predominantly verb-final); sentences whose
final token matches no detection suffix get tense "unknown" rather than a
wrong transform. All patterns are NFC code-point sequences; the loader
re-normalizes, so files authored in other normalization forms still match.

Gloss rewriting: a rule's gloss template describes the gloss tail in the
rule's *target* tense. When transforming out of tense s, the engine locates
the verb root by matching the gloss tail against the template of the first
rule that produces s (the tail shape of s); if no rule produces s, the shape
defaults to the bare final token.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from . import GlossforgeError
from .corpus import TENSES, SentenceGlossPair, nfc

ROOT = "ROOT"

# punctuation tolerated after the final verb token
_TRAILING_PUNCT = "।.?!,;:"

_DETECT_RE = re.compile(r"^detect\s+(\S+)\s*->\s*(\S+)$")
_RULE_RE = re.compile(
    r'^rule\s+(\S+)\s+(\S+)\s*->\s*(\S+)\s*:\s*'
    r'verb\s+"([^"]+)"\s*=>\s*"([^"]*)"\s*;\s*'
    r'gloss\s*=>\s*"([^"]*)"$'
)
_VERSION_RE = re.compile(r"^version\s+(\S+)$")


class RuleError(GlossforgeError):
    pass


class RuleSyntaxError(RuleError):
    pass


class UnknownTenseError(RuleError):
    pass


class NoRuleError(RuleError):
    def __init__(self, detected: str, target: str):
        super().__init__(f"no rule from {detected!r} to {target!r}")
        self.detected = detected
        self.target = target


class GlossMismatchError(RuleError):
    """Gloss tail does not match the expected shape of the detected tense."""


@dataclass(frozen=True)
class TenseRule:
    rule_id: str
    source_tense: str
    target_tense: str
    sentence_suffix_match: str
    sentence_rewrite: str
    gloss_rewrite: str

    def __post_init__(self):
        for name in ("source_tense", "target_tense"):
            t = getattr(self, name)
            if t not in TENSES or t == "unknown":
                raise RuleError(f"rule {self.rule_id!r}: bad tense {t!r}")
        if self.source_tense == self.target_tense:
            raise RuleError(f"rule {self.rule_id!r}: source and target tense are equal")
        if not self.sentence_suffix_match:
            raise RuleError(f"rule {self.rule_id!r}: empty verb suffix")
        if self.sentence_rewrite.count(ROOT) > 1:
            raise RuleError(f"rule {self.rule_id!r}: verb template references ROOT more than once")
        gloss_tokens = self.gloss_rewrite.split()
        if not gloss_tokens:
            raise RuleError(f"rule {self.rule_id!r}: empty gloss template")
        if sum(1 for t in gloss_tokens if t == ROOT) > 1:
            raise RuleError(f"rule {self.rule_id!r}: gloss template references ROOT more than once")
        for t in gloss_tokens:
            if t != ROOT and ROOT in t:
                raise RuleError(
                    f"rule {self.rule_id!r}: ROOT must be a standalone gloss token, got {t!r}"
                )

    @property
    def gloss_template_tokens(self) -> tuple[str, ...]:
        return tuple(self.gloss_rewrite.split())


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[TenseRule, ...]
    detection_rules: tuple[tuple[str, str], ...]
    version: str = "1"

    def tail_shape(self, tense: str) -> tuple[str, ...]:
        """Gloss tail shape of a tense: template of the first rule producing it."""
        for r in self.rules:
            if r.target_tense == tense:
                return r.gloss_template_tokens
        return (ROOT,)

    def rules_for_tense(self, tense: str) -> tuple[TenseRule, ...]:
        """Rules whose source or target equals the given tense (prompt fallback set)."""
        return tuple(r for r in self.rules if tense in (r.source_tense, r.target_tense))


def load_rules(path: str | Path) -> RuleSet:
    """Parse and validate a rule file; errors carry 1-based line numbers."""
    path = Path(path)
    rules: list[TenseRule] = []
    detection: list[tuple[str, str]] = []
    version = "1"
    seen_ids: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = nfc(raw.strip())
            if not line or line.startswith("#"):
                continue
            if m := _VERSION_RE.match(line):
                version = m.group(1)
                continue
            if m := _DETECT_RE.match(line):
                suffix, tense = m.group(1), m.group(2)
                if tense not in TENSES or tense == "unknown":
                    raise RuleSyntaxError(f"{path}:{lineno}: bad tense {tense!r}")
                detection.append((suffix, tense))
                continue
            if m := _RULE_RE.match(line):
                rid = m.group(1)
                if rid in seen_ids:
                    raise RuleSyntaxError(
                        f"{path}: duplicate rule id {rid!r} at lines {seen_ids[rid]} and {lineno}"
                    )
                seen_ids[rid] = lineno
                try:
                    rules.append(
                        TenseRule(
                            rule_id=rid,
                            source_tense=m.group(2),
                            target_tense=m.group(3),
                            sentence_suffix_match=m.group(4),
                            sentence_rewrite=m.group(5),
                            gloss_rewrite=m.group(6),
                        )
                    )
                except RuleError as exc:
                    raise RuleSyntaxError(f"{path}:{lineno}: {exc}") from exc
                continue
            raise RuleSyntaxError(f"{path}:{lineno}: unrecognized line {line!r}")
    return RuleSet(tuple(rules), tuple(detection), version)


def format_rules(rs: RuleSet) -> str:
    """Canonical text form; load(format(rs)) == rs, comments are not kept."""
    lines = [f"version {rs.version}"]
    for suffix, tense in rs.detection_rules:
        lines.append(f"detect {suffix} -> {tense}")
    for r in rs.rules:
        lines.append(
            f'rule {r.rule_id} {r.source_tense} -> {r.target_tense} : '
            f'verb "{r.sentence_suffix_match}" => "{r.sentence_rewrite}" ; '
            f'gloss => "{r.gloss_rewrite}"'
        )
    return "\n".join(lines) + "\n"


def _final_token(sentence: str) -> tuple[str, str]:
    """Last whitespace token split into (core, trailing punctuation)."""
    tokens = nfc(sentence).split()
    if not tokens:
        return "", ""
    tok = tokens[-1]
    core = tok.rstrip(_TRAILING_PUNCT)
    return core, tok[len(core):]


def detect_tense(sentence: str, rs: RuleSet) -> str:
    """Tense of the first detection rule whose suffix matches the final token.

    Detection rules are tried in file order, so files should list longer
    suffixes before their own prefixes. Returns "unknown" when nothing
    matches; that is a value, not an error.
    """
    core, _ = _final_token(sentence)
    if core:
        for suffix, tense in rs.detection_rules:
            if core.endswith(suffix):
                return tense
    return "unknown"


def _pick_rule(rs: RuleSet, detected: str, target: str, verb: str) -> TenseRule:
    candidates = [
        r
        for r in rs.rules
        if r.source_tense == detected and r.target_tense == target and verb.endswith(r.sentence_suffix_match)
    ]
    if not candidates:
        raise NoRuleError(detected, target)
    # longest suffix wins; file order breaks ties between equal-length suffixes
    return max(candidates, key=lambda r: len(r.sentence_suffix_match))


def _match_gloss_root(gloss: tuple[str, ...], shape: tuple[str, ...]) -> tuple[int, str | None]:
    """Match a tail shape against the gloss; returns (tail length, captured root)."""
    k = len(shape)
    if len(gloss) < k:
        raise GlossMismatchError(f"gloss too short for tail shape {shape}")
    tail = gloss[-k:]
    root = None
    for expected, actual in zip(shape, tail):
        if expected == ROOT:
            root = actual
        elif expected != actual:
            raise GlossMismatchError(f"gloss tail {tail} does not match shape {shape}")
    return k, root


def transform_tense(p: SentenceGlossPair, target: str, rs: RuleSet) -> SentenceGlossPair:
    """Rewrite a pair into the target tense using the loaded rules.

    The returned pair carries provenance "rule_tense", tense = target and
    source_pair_id = p.id. Only the final sentence token and the gloss tail
    named by the templates change. Transforming into the detected tense is
    the identity.
    """
    if target not in TENSES or target == "unknown":
        raise RuleError(f"bad target tense {target!r}")
    detected = detect_tense(p.sentence, rs)
    if detected == "unknown":
        raise UnknownTenseError(f"pair {p.id!r}: cannot detect tense of {p.sentence!r}")
    if target == detected:
        return p

    verb, punct = _final_token(p.sentence)
    rule = _pick_rule(rs, detected, target, verb)
    stem = verb[: len(verb) - len(rule.sentence_suffix_match)]
    new_verb = rule.sentence_rewrite.replace(ROOT, stem)
    tokens = p.sentence.split()
    tokens[-1] = new_verb + punct
    new_sentence = " ".join(tokens)

    tail_len, root = _match_gloss_root(p.gloss, rs.tail_shape(detected))
    new_tail: list[str] = []
    for t in rule.gloss_template_tokens:
        if t == ROOT:
            if root is None:
                raise GlossMismatchError(
                    f"rule {rule.rule_id!r} needs ROOT but the {detected!r} tail shape captures none"
                )
            new_tail.append(root)
        else:
            new_tail.append(t)
    new_gloss = p.gloss[: len(p.gloss) - tail_len] + tuple(new_tail)

    return SentenceGlossPair(
        id=f"{p.id}-{target}",
        sentence=new_sentence,
        gloss=new_gloss,
        provenance="rule_tense",
        tense=target,
        source_pair_id=p.id,
        meta={"rule_id": rule.rule_id},
    )


def expand_pair(p: SentenceGlossPair, rs: RuleSet) -> list[SentenceGlossPair]:
    """Transform a pair into every reachable tense other than its own.

    Targets without an applicable rule (or whose gloss tail cannot be
    matched) are skipped; an undetectable source tense propagates as
    UnknownTenseError.
    """
    detected = detect_tense(p.sentence, rs)
    if detected == "unknown":
        raise UnknownTenseError(f"pair {p.id!r}: cannot detect tense of {p.sentence!r}")
    out: list[SentenceGlossPair] = []
    for target in TENSES:
        if target in ("unknown", detected):
            continue
        try:
            out.append(transform_tense(p, target, rs))
        except (NoRuleError, GlossMismatchError):
            continue
    return out
