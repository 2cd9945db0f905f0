"""Sentence-gloss corpus model: JSONL/TSV I/O, dedup, seeded train/dev/test splits.

The JSONL format is canonical (one object per line, keys: id, sentence,
gloss, provenance, tense, source_pair_id, meta). TSV is a lossy interchange
format carrying only id, sentence and the space-joined gloss.
"""
from __future__ import annotations

import json
import random
import unicodedata
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import GlossforgeError

PROVENANCES = ("manual", "rule_tense", "mask_subst", "rag")
TENSES = ("present", "past", "future", "present_continuous", "past_continuous", "unknown")
SPLIT_CLASSES = ("train", "dev", "test")

JSONL_KEYS = ("id", "sentence", "gloss", "provenance", "tense", "source_pair_id", "meta")


class CorpusError(GlossforgeError):
    pass


def nfc(text: str) -> str:
    """NFC-normalize; Bangla combining marks otherwise break token equality."""
    return unicodedata.normalize("NFC", text)


@dataclass(frozen=True)
class SentenceGlossPair:
    """One source sentence with its ordered gloss token sequence.

    Sentence and gloss tokens are NFC-normalized at construction time, so
    equality and suffix matching are stable regardless of the input form.
    """

    id: str
    sentence: str
    gloss: tuple[str, ...]
    provenance: str = "manual"
    tense: str | None = None
    source_pair_id: str | None = None
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "sentence", nfc(self.sentence))
        object.__setattr__(self, "gloss", tuple(nfc(t) for t in self.gloss))
        if not self.id:
            raise CorpusError("pair id must be a non-empty string")
        if not self.sentence.strip():
            raise CorpusError(f"pair {self.id!r}: sentence is empty")
        if len(self.gloss) < 1:
            raise CorpusError(f"pair {self.id!r}: gloss needs at least one token")
        for tok in self.gloss:
            if not tok or any(ch.isspace() for ch in tok):
                raise CorpusError(f"pair {self.id!r}: bad gloss token {tok!r}")
        if self.provenance not in PROVENANCES:
            raise CorpusError(f"pair {self.id!r}: unknown provenance {self.provenance!r}")
        if self.tense is not None and self.tense not in TENSES:
            raise CorpusError(f"pair {self.id!r}: unknown tense {self.tense!r}")
        if self.provenance == "manual" and self.source_pair_id is not None:
            raise CorpusError(f"pair {self.id!r}: manual pairs must not carry source_pair_id")
        # rag pairs generated from external sentences have no originating pair,
        # so the reference is required only for the derived-in-place methods
        if self.provenance in ("rule_tense", "mask_subst") and not self.source_pair_id:
            raise CorpusError(f"pair {self.id!r}: {self.provenance} requires source_pair_id")

    def to_json_obj(self) -> dict:
        return {
            "id": self.id,
            "sentence": self.sentence,
            "gloss": list(self.gloss),
            "provenance": self.provenance,
            "tense": self.tense,
            "source_pair_id": self.source_pair_id,
            "meta": dict(self.meta),
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "SentenceGlossPair":
        if not isinstance(obj, dict):
            raise CorpusError("record is not a JSON object")
        unknown = set(obj) - set(JSONL_KEYS)
        if unknown:
            raise CorpusError(f"unknown fields {sorted(unknown)}")
        gloss = obj.get("gloss")
        if not isinstance(gloss, list) or not all(isinstance(t, str) for t in gloss):
            raise CorpusError("gloss must be a list of strings")
        meta = obj.get("meta") or {}
        if not isinstance(meta, dict):
            raise CorpusError("meta must be an object")
        return cls(
            id=obj.get("id", ""),
            sentence=obj.get("sentence", ""),
            gloss=tuple(gloss),
            provenance=obj.get("provenance", "manual"),
            tense=obj.get("tense"),
            source_pair_id=obj.get("source_pair_id"),
            meta={str(k): str(v) for k, v in meta.items()},
        )


@dataclass(frozen=True)
class Corpus:
    """Ordered, immutable collection of pairs with an optional split map."""

    pairs: tuple[SentenceGlossPair, ...]
    split: dict[str, str] | None = None

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        seen: dict[str, int] = {}
        for i, p in enumerate(self.pairs):
            if p.id in seen:
                raise CorpusError(f"duplicate id {p.id!r} (pairs {seen[p.id]} and {i})")
            seen[p.id] = i
        if self.split is not None:
            ids = set(seen)
            assigned = set(self.split)
            if assigned != ids:
                missing = sorted(ids - assigned)[:5]
                extra = sorted(assigned - ids)[:5]
                raise CorpusError(f"split map mismatch (missing {missing}, extra {extra})")
            bad = {c for c in self.split.values() if c not in SPLIT_CLASSES}
            if bad:
                raise CorpusError(f"unknown split classes {sorted(bad)}")

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def by_id(self) -> dict[str, SentenceGlossPair]:
        return {p.id: p for p in self.pairs}

    def subset(self, split_class: str) -> "Corpus":
        """Pairs assigned to one split class, in corpus order."""
        if self.split is None:
            raise CorpusError("corpus has no split")
        if split_class not in SPLIT_CLASSES:
            raise CorpusError(f"unknown split class {split_class!r}")
        return Corpus(tuple(p for p in self.pairs if self.split[p.id] == split_class))

    def validate_references(self) -> None:
        """Check that every source_pair_id points at a manual pair in this corpus.

        Run this on merged corpora; single-method output files legitimately
        reference pairs that live elsewhere.
        """
        manual = {p.id for p in self.pairs if p.provenance == "manual"}
        for p in self.pairs:
            if p.source_pair_id is not None and p.source_pair_id not in manual:
                raise CorpusError(
                    f"pair {p.id!r}: source_pair_id {p.source_pair_id!r} "
                    "does not reference a manual pair in this corpus"
                )


@dataclass(frozen=True)
class SplitRatios:
    """Train/dev/test fractions (each in (0,1), summing to 1) plus the shuffle seed."""

    train: float = 0.8
    dev: float = 0.1
    test: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("train", "dev", "test"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise CorpusError(f"split ratio {name}={v} must be in (0,1)")
        if abs(self.train + self.dev + self.test - 1.0) > 1e-9:
            raise CorpusError("split ratios must sum to 1.0")


def seeded_shuffle(items: list, seed: int) -> list:
    """Fisher-Yates with an explicitly seeded PRNG; stable across platforms."""
    rng = random.Random(seed)
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        j = rng.randrange(i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def split_corpus(c: Corpus, r: SplitRatios, overwrite: bool = False) -> Corpus:
    """Assign every pair to train/dev/test deterministically.

    Sizes are floor(n*train) / floor(n*dev) / remainder. The assignment is a
    seeded Fisher-Yates shuffle over the sorted ids, so it is a pure function
    of (id set, ratios, seed), independent of pair order in the file.
    """
    if len(c) == 0:
        raise CorpusError("cannot split an empty corpus")
    if c.split is not None and not overwrite:
        raise CorpusError("corpus already has a split (pass overwrite=True to replace)")
    n = len(c)
    n_train = int(n * r.train)
    n_dev = int(n * r.dev)
    shuffled = seeded_shuffle(sorted(p.id for p in c.pairs), r.seed)
    split: dict[str, str] = {}
    for i, pid in enumerate(shuffled):
        if i < n_train:
            split[pid] = "train"
        elif i < n_train + n_dev:
            split[pid] = "dev"
        else:
            split[pid] = "test"
    return Corpus(c.pairs, split)


def dedupe(c: Corpus) -> tuple[Corpus, int]:
    """Collapse pairs with identical (NFC sentence, gloss sequence); first wins.

    Returns the deduplicated corpus and the number of removed pairs.
    """
    seen: set[tuple[str, tuple[str, ...]]] = set()
    kept: list[SentenceGlossPair] = []
    for p in c.pairs:
        key = (p.sentence, p.gloss)
        if key in seen:
            continue
        seen.add(key)
        kept.append(p)
    removed = len(c.pairs) - len(kept)
    split = None
    if c.split is not None:
        kept_ids = {p.id for p in kept}
        split = {pid: cls for pid, cls in c.split.items() if pid in kept_ids}
    return Corpus(tuple(kept), split), removed


def load_corpus(path: str | Path, format: str = "jsonl") -> Corpus:
    """Parse a corpus file into a Corpus, NFC-normalizing all text.

    Errors carry 1-based line numbers; a duplicate id names both offending
    lines.
    """
    path = Path(path)
    if format == "jsonl":
        pairs = _load_jsonl(path)
    elif format == "tsv":
        pairs = _load_tsv(path)
    else:
        raise CorpusError(f"unknown corpus format {format!r}")
    return Corpus(tuple(pairs))


def _load_jsonl(path: Path) -> list[SentenceGlossPair]:
    pairs: list[SentenceGlossPair] = []
    line_of: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
            try:
                pair = SentenceGlossPair.from_json_obj(obj)
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
            if pair.id in line_of:
                raise CorpusError(
                    f"{path}: duplicate id {pair.id!r} at lines {line_of[pair.id]} and {lineno}"
                )
            line_of[pair.id] = lineno
            pairs.append(pair)
    return pairs


def _load_tsv(path: Path) -> list[SentenceGlossPair]:
    pairs: list[SentenceGlossPair] = []
    line_of: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header.split("\t") != ["id", "sentence", "gloss"]:
            raise CorpusError(f"{path}:1: expected TSV header 'id<TAB>sentence<TAB>gloss'")
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            cols = line.rstrip("\n").split("\t")
            if len(cols) != 3:
                raise CorpusError(f"{path}:{lineno}: expected 3 tab-separated columns")
            pid, sentence, gloss = cols
            try:
                pair = SentenceGlossPair(id=pid, sentence=sentence, gloss=tuple(gloss.split(" ")))
            except CorpusError as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
            if pair.id in line_of:
                raise CorpusError(
                    f"{path}: duplicate id {pair.id!r} at lines {line_of[pair.id]} and {lineno}"
                )
            line_of[pair.id] = lineno
            pairs.append(pair)
    return pairs


def write_corpus(c: Corpus, path: str | Path, format: str = "jsonl") -> None:
    """Write a corpus; JSONL round-trips losslessly, TSV rejects embedded tabs."""
    path = Path(path)
    if not path.parent.exists():
        raise CorpusError(f"parent directory does not exist: {path.parent}")
    try:
        if format == "jsonl":
            _write_jsonl(c, path)
        elif format == "tsv":
            _write_tsv(c, path)
        else:
            raise CorpusError(f"unknown corpus format {format!r}")
    except OSError as exc:
        raise CorpusError(f"cannot write {path}: {exc}") from exc


def _write_jsonl(c: Corpus, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in c.pairs:
            fh.write(json.dumps(p.to_json_obj(), ensure_ascii=False) + "\n")


def _write_tsv(c: Corpus, path: Path) -> None:
    for p in c.pairs:
        if "\t" in p.sentence or any("\t" in t for t in p.gloss):
            raise CorpusError(f"pair {p.id!r} contains a tab; TSV cannot encode it")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("id\tsentence\tgloss\n")
        for p in c.pairs:
            fh.write(f"{p.id}\t{p.sentence}\t{' '.join(p.gloss)}\n")
