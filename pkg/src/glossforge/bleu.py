"""Corpus-level BLEU-1..4 over gloss token sequences.

Single reference per example, clipped n-gram counts summed over the corpus
before division, brevity penalty exp(1 - r/c) when the hypothesis corpus is
shorter. Unsmoothed by default; add-one clipped smoothing (numerator and
denominator of p_n each +1 for n > 1) is available for sentence-level logs.
"""
from __future__ import annotations

import json
import logging
import math
import shlex
import subprocess
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from . import GlossforgeError
from .corpus import nfc

log = logging.getLogger("glossforge.bleu")

SMOOTHINGS = ("none", "add_one_clipped")


class EvalError(GlossforgeError):
    pass


@dataclass(frozen=True)
class EvalExample:
    id: str
    reference: tuple[str, ...]
    hypothesis: tuple[str, ...]

    def __post_init__(self):
        if not self.reference:
            raise EvalError(f"example {self.id!r}: empty reference")
        # empty hypotheses are scored, not rejected


@dataclass(frozen=True)
class BleuComponents:
    p_n: tuple[float, ...]
    c: int
    r: int
    bp: float
    bleu_n: tuple[float, ...]  # cumulative scores, scaled x100


def tokenize_gloss(text: str) -> tuple[str, ...]:
    """NFC-normalize, split on Unicode whitespace, drop empties."""
    return tuple(nfc(text).split())


def _ngrams(tokens: tuple[str, ...], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu_corpus(examples: list[EvalExample], max_n: int = 4,
                smoothing: str = "none") -> BleuComponents:
    if not examples:
        raise EvalError("no examples to score")
    if not (1 <= max_n <= 4):
        raise EvalError(f"max_n must be in 1..4, got {max_n}")
    if smoothing not in SMOOTHINGS:
        raise EvalError(f"unknown smoothing {smoothing!r}")

    clipped = [0] * max_n
    total = [0] * max_n
    c = 0
    r = 0
    for ex in examples:
        c += len(ex.hypothesis)
        r += len(ex.reference)
        for n in range(1, max_n + 1):
            hyp_counts = _ngrams(ex.hypothesis, n)
            if not hyp_counts:
                continue
            ref_counts = _ngrams(ex.reference, n)
            total[n - 1] += sum(hyp_counts.values())
            clipped[n - 1] += sum(
                min(count, ref_counts[gram]) for gram, count in hyp_counts.items()
            )

    if c == 0:
        log.warning("all hypotheses empty; BLEU is 0 for every n")
        return BleuComponents(tuple(0.0 for _ in range(max_n)), 0, r, 0.0,
                              tuple(0.0 for _ in range(max_n)))

    p_n = []
    for n in range(1, max_n + 1):
        num, den = clipped[n - 1], total[n - 1]
        if smoothing == "add_one_clipped" and n > 1:
            num, den = num + 1, den + 1
        p_n.append(num / den if den > 0 else 0.0)

    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    bleu_n = []
    for n in range(1, max_n + 1):
        head = p_n[:n]
        if all(p > 0.0 for p in head):
            bleu_n.append(100.0 * bp * math.exp(sum(math.log(p) for p in head) / n))
        else:
            bleu_n.append(0.0)
    return BleuComponents(tuple(p_n), c, r, bp, tuple(bleu_n))


def sentence_bleu(ex: EvalExample, max_n: int = 4,
                  smoothing: str = "add_one_clipped") -> BleuComponents:
    """Per-example score for error analysis; smoothed by default."""
    return bleu_corpus([ex], max_n=max_n, smoothing=smoothing)


def _read_gloss_lines(path: Path) -> list[tuple[str, tuple[str, ...]]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            out.append((str(lineno), tokenize_gloss(line)))
    return out


def _read_gloss_jsonl(path: Path) -> list[tuple[str, tuple[str, ...]]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out.append((str(obj["id"]), tuple(nfc(t) for t in obj["gloss"])))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise EvalError(f"{path}:{lineno}: malformed gloss record") from exc
    return out


def evaluate_files(hyp_path: str | Path, ref_path: str | Path, format: str = "text",
                   max_n: int = 4) -> tuple[BleuComponents, list[dict]]:
    """Score aligned hypothesis/reference files.

    Text format aligns by line number, jsonl by id. Returns the corpus
    components plus a per-example log with smoothed sentence-level scores.
    """
    hyp_path, ref_path = Path(hyp_path), Path(ref_path)
    reader = {"text": _read_gloss_lines, "jsonl": _read_gloss_jsonl}.get(format)
    if reader is None:
        raise EvalError(f"unknown eval format {format!r}")
    hyps = reader(hyp_path)
    refs = reader(ref_path)
    if len(hyps) != len(refs):
        raise EvalError(
            f"hypothesis/reference count mismatch: {len(hyps)} in {hyp_path} "
            f"vs {len(refs)} in {ref_path}"
        )
    if format == "jsonl":
        ref_map = dict(refs)
        missing = [hid for hid, _ in hyps if hid not in ref_map]
        if missing:
            raise EvalError(f"ids missing from reference file: {missing[:5]}")
        aligned = [(hid, toks, ref_map[hid]) for hid, toks in hyps]
    else:
        aligned = [(hid, toks, rtoks) for (hid, toks), (_, rtoks) in zip(hyps, refs)]

    examples = [EvalExample(id=i, reference=ref, hypothesis=hyp) for i, hyp, ref in aligned]
    components = bleu_corpus(examples, max_n=max_n)
    per_example = []
    for ex in examples:
        s = sentence_bleu(ex, max_n=max_n)
        per_example.append({
            "id": ex.id,
            "hyp_len": len(ex.hypothesis),
            "ref_len": len(ex.reference),
            "bleu": [round(b, 2) for b in s.bleu_n],
        })
    return components, per_example


def render_bleu(components: BleuComponents) -> str:
    header = "  ".join(f"BLEU-{n}" for n in range(1, len(components.bleu_n) + 1))
    row = "  ".join(f"{b:6.2f}" for b in components.bleu_n)
    return (
        f"{header}\n{row}\n"
        f"bp={components.bp:.4f} c={components.c} r={components.r}\n"
    )


def run_external_scorer(cmd: str | list[str], hyp_path: str | Path,
                        ref_path: str | Path) -> tuple[list[float], float]:
    """Invoke `<cmd> <hyp> <ref>` and parse one float per line plus a final
    `system: <float>` line. Output is reported verbatim, never recomputed."""
    argv = shlex.split(cmd) if isinstance(cmd, str) else list(cmd)
    argv += [str(hyp_path), str(ref_path)]
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, check=True)
    except (OSError, subprocess.CalledProcessError) as exc:
        raise EvalError(f"external scorer failed: {exc}") from exc
    lines = [ln.strip() for ln in proc.stdout.splitlines() if ln.strip()]
    if not lines or not lines[-1].startswith("system:"):
        raise EvalError("external scorer output missing final 'system: <float>' line")
    try:
        system = float(lines[-1].split(":", 1)[1])
        per_line = [float(ln) for ln in lines[:-1]]
    except ValueError as exc:
        raise EvalError(f"external scorer output not numeric: {exc}") from exc
    return per_line, system
