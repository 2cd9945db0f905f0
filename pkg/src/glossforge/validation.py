"""Dual-rater review bookkeeping and agreement statistics.

Raters answer two questions per sampled pair: a Yes/No understandability
judgment and a 1-5 quality score. Nominal Cohen's kappa is

    kappa = (p_o - p_e) / (1 - p_e)

with p_o the fraction of items the raters label identically and
p_e = sum_c P_a(c) * P_b(c) the agreement expected from the two raters'
independent label marginals. Weighted variants use disagreement weights
w_ij = |i-j|/4 (linear) or (i-j)^2/16 (quadratic) over the 1..5 scale;
weighting "none" reduces exactly to the nominal statistic.

Annotations live in an append-only JSONL journal; the last record per
(sample_id, rater_id) wins.
"""
from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import GlossforgeError
from .corpus import Corpus, seeded_shuffle

log = logging.getLogger("glossforge.validation")

WEIGHTINGS = ("none", "linear", "quadratic")
QUALITY_LABELS = (1, 2, 3, 4, 5)


class ValidationError(GlossforgeError):
    pass


@dataclass(frozen=True)
class AnnotationRecord:
    sample_id: str
    rater_id: str
    understandable: bool
    quality: int
    created_at: str = ""

    def __post_init__(self):
        if not self.sample_id or not self.rater_id:
            raise ValidationError("sample_id and rater_id must be non-empty")
        if not isinstance(self.understandable, bool):
            raise ValidationError("understandable must be a boolean")
        if self.quality not in QUALITY_LABELS:
            raise ValidationError(f"quality must be in 1..5, got {self.quality!r}")

    def to_json_obj(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "rater_id": self.rater_id,
            "understandable": self.understandable,
            "quality": self.quality,
            "created_at": self.created_at,
        }


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def append_record(path: str | Path, record: AnnotationRecord) -> None:
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(record.to_json_obj(), ensure_ascii=False) + "\n")


def read_journal(path: str | Path) -> list[AnnotationRecord]:
    path = Path(path)
    records: list[AnnotationRecord] = []
    if not path.exists():
        return records
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                records.append(AnnotationRecord(
                    sample_id=obj["sample_id"],
                    rater_id=obj["rater_id"],
                    understandable=obj["understandable"],
                    quality=obj["quality"],
                    created_at=obj.get("created_at", ""),
                ))
            except (json.JSONDecodeError, KeyError, TypeError, ValidationError) as exc:
                raise ValidationError(f"{path}:{lineno}: bad journal record: {exc}") from exc
    return records


def latest_records(records: list[AnnotationRecord]) -> dict[tuple[str, str], AnnotationRecord]:
    """Collapse to the last record per (sample_id, rater_id), logging replacements."""
    latest: dict[tuple[str, str], AnnotationRecord] = {}
    for rec in records:
        key = (rec.sample_id, rec.rater_id)
        if key in latest:
            log.info("rating for sample %s by %s replaced", rec.sample_id, rec.rater_id)
        latest[key] = rec
    return latest


def sample_for_review(c: Corpus, fraction: float, seed: int) -> list[str]:
    """round(n*fraction) ids, uniform without replacement, seed-deterministic."""
    if len(c) == 0:
        raise ValidationError("cannot sample from an empty corpus")
    if not (0.0 < fraction <= 1.0):
        raise ValidationError(f"fraction must be in (0, 1], got {fraction}")
    k = int(len(c) * fraction + 0.5)
    shuffled = seeded_shuffle(sorted(p.id for p in c.pairs), seed)
    return shuffled[:k]


@dataclass(frozen=True)
class AgreementStats:
    p_o: float
    p_e: float
    kappa: float


def cohen_kappa_nominal(a: list, b: list) -> AgreementStats:
    """Chance-corrected agreement between two aligned label lists.

    Labels may be any hashable values. When both raters are constant and
    identical (p_e = 1 with p_o = 1), kappa is 1 by convention rather than
    0/0.
    """
    if len(a) != len(b):
        raise ValidationError(f"label lists differ in length: {len(a)} vs {len(b)}")
    if not a:
        raise ValidationError("label lists are empty")
    n = len(a)
    p_o = sum(1 for x, y in zip(a, b) if x == y) / n
    marg_a = Counter(a)
    marg_b = Counter(b)
    p_e = sum(marg_a[c] * marg_b.get(c, 0) for c in marg_a) / (n * n)
    if p_e >= 1.0:
        return AgreementStats(p_o=p_o, p_e=1.0, kappa=1.0)
    return AgreementStats(p_o=p_o, p_e=p_e, kappa=(p_o - p_e) / (1.0 - p_e))


def _weight(i: int, j: int, weighting: str) -> float:
    if weighting == "linear":
        return abs(i - j) / 4.0
    if weighting == "quadratic":
        return (i - j) ** 2 / 16.0
    return 0.0 if i == j else 1.0


def cohen_kappa_weighted(a: list[int], b: list[int], weighting: str = "none") -> AgreementStats:
    """Weighted kappa over the 1..5 quality scale.

    p_o and p_e are reported as weighted agreements (1 minus the weighted
    observed/expected disagreement), so kappa = (p_o - p_e)/(1 - p_e) holds
    for every weighting and "none" coincides with cohen_kappa_nominal.
    """
    if weighting not in WEIGHTINGS:
        raise ValidationError(f"unknown weighting {weighting!r}")
    if len(a) != len(b):
        raise ValidationError(f"label lists differ in length: {len(a)} vs {len(b)}")
    if not a:
        raise ValidationError("label lists are empty")
    for lab in (*a, *b):
        if lab not in QUALITY_LABELS:
            raise ValidationError(f"label {lab!r} outside 1..5")
    n = len(a)
    disagree_o = sum(_weight(x, y, weighting) for x, y in zip(a, b)) / n
    marg_a = Counter(a)
    marg_b = Counter(b)
    disagree_e = sum(
        marg_a[i] * marg_b[j] * _weight(i, j, weighting)
        for i in marg_a
        for j in marg_b
    ) / (n * n)
    p_o = 1.0 - disagree_o
    p_e = 1.0 - disagree_e
    if disagree_e == 0.0:
        return AgreementStats(p_o=p_o, p_e=1.0, kappa=1.0)
    return AgreementStats(p_o=p_o, p_e=p_e, kappa=(p_o - p_e) / disagree_e)


def interpret_kappa(k: float) -> str:
    """Landis-Koch verbal band for a kappa value."""
    if not (-1.0 <= k <= 1.0):
        raise ValidationError(f"kappa {k} outside [-1, 1]")
    if k < 0.0:
        return "Poor"
    if k <= 0.20:
        return "Slight"
    if k <= 0.40:
        return "Fair"
    if k <= 0.60:
        return "Moderate"
    if k <= 0.80:
        return "Substantial"
    return "Almost Perfect"


@dataclass(frozen=True)
class RaterSummary:
    validation_rate: float  # percent, one decimal
    avg_quality: float      # two decimals
    high_pct: float         # quality >= 4, one decimal
    acceptable_pct: float   # quality == 3
    low_pct: float          # quality <= 2

    def to_json_obj(self) -> dict:
        return {
            "validation_rate": self.validation_rate,
            "avg_quality": self.avg_quality,
            "high_pct": self.high_pct,
            "acceptable_pct": self.acceptable_pct,
            "low_pct": self.low_pct,
        }


@dataclass(frozen=True)
class ValidationReport:
    n_samples: int
    rater_ids: tuple[str, str]
    per_rater: dict[str, RaterSummary]
    combined: RaterSummary
    kappa_binary: AgreementStats
    kappa_binary_label: str
    kappa_quality: AgreementStats
    kappa_quality_label: str
    quality_weighting: str

    def to_json_obj(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "rater_ids": list(self.rater_ids),
            "per_rater": {r: s.to_json_obj() for r, s in self.per_rater.items()},
            "combined": self.combined.to_json_obj(),
            "kappa_binary": {
                "p_o": self.kappa_binary.p_o,
                "p_e": self.kappa_binary.p_e,
                "kappa": round(self.kappa_binary.kappa, 4),
                "label": self.kappa_binary_label,
            },
            "kappa_quality": {
                "p_o": self.kappa_quality.p_o,
                "p_e": self.kappa_quality.p_e,
                "kappa": round(self.kappa_quality.kappa, 4),
                "label": self.kappa_quality_label,
            },
            "quality_weighting": self.quality_weighting,
        }


def _summarize(records: list[AnnotationRecord]) -> RaterSummary:
    n = len(records)
    yes = sum(1 for r in records if r.understandable)
    high = sum(1 for r in records if r.quality >= 4)
    acceptable = sum(1 for r in records if r.quality == 3)
    low = sum(1 for r in records if r.quality <= 2)
    return RaterSummary(
        validation_rate=round(100.0 * yes / n, 1),
        avg_quality=round(sum(r.quality for r in records) / n, 2),
        high_pct=round(100.0 * high / n, 1),
        acceptable_pct=round(100.0 * acceptable / n, 1),
        low_pct=round(100.0 * low / n, 1),
    )


def build_report(records: list[AnnotationRecord], quality_weighting: str = "none") -> ValidationReport:
    """Aggregate dual-rater records into rates, buckets and the two kappas.

    Requires exactly two raters who rated the same sample set; the report
    states which quality weighting was used.
    """
    latest = latest_records(records)
    raters = sorted({rid for _, rid in latest})
    if len(raters) != 2:
        raise ValidationError(f"need exactly two raters, found {len(raters)}: {raters}")
    ra, rb = raters
    samples_a = {sid for sid, rid in latest if rid == ra}
    samples_b = {sid for sid, rid in latest if rid == rb}
    if samples_a != samples_b:
        missing = sorted(samples_a ^ samples_b)
        raise ValidationError(f"raters rated different samples; unmatched: {missing[:10]}")

    sample_ids = sorted(samples_a)
    rec_a = [latest[(sid, ra)] for sid in sample_ids]
    rec_b = [latest[(sid, rb)] for sid in sample_ids]

    binary = cohen_kappa_nominal(
        [r.understandable for r in rec_a], [r.understandable for r in rec_b]
    )
    quality = cohen_kappa_weighted(
        [r.quality for r in rec_a], [r.quality for r in rec_b], weighting=quality_weighting
    )
    return ValidationReport(
        n_samples=len(sample_ids),
        rater_ids=(ra, rb),
        per_rater={ra: _summarize(rec_a), rb: _summarize(rec_b)},
        combined=_summarize(rec_a + rec_b),
        kappa_binary=binary,
        kappa_binary_label=interpret_kappa(binary.kappa),
        kappa_quality=quality,
        kappa_quality_label=interpret_kappa(quality.kappa),
        quality_weighting=quality_weighting,
    )


def render_report(report: ValidationReport) -> str:
    """Fixed-width text table mirroring the dual-rater summary layout."""
    ra, rb = report.rater_ids
    sa, sb = report.per_rater[ra], report.per_rater[rb]
    sc = report.combined

    def row(label: str, va: str, vb: str, vc: str) -> str:
        return f"{label:<34}{va:>10}{vb:>10}{vc:>10}"

    lines = [
        row("Metric", ra[:10], rb[:10], "Combined"),
        row("Validation Rate (%)", f"{sa.validation_rate:.1f}", f"{sb.validation_rate:.1f}",
            f"{sc.validation_rate:.1f}"),
        row("Average Quality Score", f"{sa.avg_quality:.2f}", f"{sb.avg_quality:.2f}",
            f"{sc.avg_quality:.2f}"),
        "Quality Distribution",
        row("  High Quality (Score >= 4)", f"{sa.high_pct:.1f}%", f"{sb.high_pct:.1f}%",
            f"{sc.high_pct:.1f}%"),
        row("  Acceptable (Score = 3)", f"{sa.acceptable_pct:.1f}%", f"{sb.acceptable_pct:.1f}%",
            f"{sc.acceptable_pct:.1f}%"),
        row("  Low Quality (Score <= 2)", f"{sa.low_pct:.1f}%", f"{sb.low_pct:.1f}%",
            f"{sc.low_pct:.1f}%"),
        "Inter-rater Reliability (Cohen's Kappa)",
        f"  Binary Agreement: kappa = {report.kappa_binary.kappa:.4f} ({report.kappa_binary_label})",
        f"  Quality Agreement: kappa = {report.kappa_quality.kappa:.4f} "
        f"({report.kappa_quality_label}) [weighting: {report.quality_weighting}]",
    ]
    return "\n".join(lines) + "\n"
