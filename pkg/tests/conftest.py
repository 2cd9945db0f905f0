"""Shared fixtures: toy rule file, synthetic corpora, dual-rater journals."""
from __future__ import annotations

import json

import pytest

from glossforge.backends import EmbedderBackend
from glossforge.corpus import Corpus, SentenceGlossPair
from glossforge.rules import RuleSet, load_rules
from glossforge.validation import AnnotationRecord


class VectorTableEmbedder(EmbedderBackend):
    """Test embedder with fully scripted vectors per text."""

    def __init__(self, table, dimension, name="table"):
        self.table = table
        self.dimension = dimension
        self.name = name

    def embed(self, texts):
        return [list(self.table[t]) for t in texts]

# Toy verb-final language with transparent suffix morphology:
# -i present, -bo future, -lam past. Hand-checkable in every test below.
TOY_RULES_TEXT = """\
version 1
detect lam -> past
detect bo -> future
detect i -> present
rule p2f present -> future : verb "i" => "ROOTbo" ; gloss => "ROOT WILL"
rule p2pa present -> past : verb "i" => "ROOTlam" ; gloss => "ROOT DONE"
rule f2p future -> present : verb "bo" => "ROOTi" ; gloss => "ROOT"
rule f2pa future -> past : verb "bo" => "ROOTlam" ; gloss => "ROOT DONE"
rule pa2p past -> present : verb "lam" => "ROOTi" ; gloss => "ROOT"
rule pa2f past -> future : verb "lam" => "ROOTbo" ; gloss => "ROOT WILL"
"""

_SUBJECTS = ("ami", "tumi", "she", "amra")
_OBJECTS = ("bhat", "boi", "kaj", "gan", "chithi", "chobi")
_STEMS = ("kor", "por", "likh", "dekh")
_SUFFIX = {"present": "i", "future": "bo", "past": "lam"}
_TAIL = {"present": (), "future": ("WILL",), "past": ("DONE",)}


def make_pair(i: int, tense: str = "present") -> SentenceGlossPair:
    subj = _SUBJECTS[i % len(_SUBJECTS)]
    obj = f"{_OBJECTS[i % len(_OBJECTS)]}{i:04d}"
    marker = f"r{i:04d}"   # short unique token that survives mask substitution
    stem = _STEMS[(i // len(_SUBJECTS)) % len(_STEMS)]
    return SentenceGlossPair(
        id=f"p{i:04d}",
        sentence=f"{subj} {obj} {marker} {stem}{_SUFFIX[tense]}",
        gloss=(subj, obj, marker, stem) + _TAIL[tense],
        provenance="manual",
        tense=tense,
    )


def make_corpus(n: int, tenses: tuple[str, ...] = ("present", "future", "past")) -> Corpus:
    return Corpus(tuple(make_pair(i, tenses[i % len(tenses)]) for i in range(n)))


def table1_records() -> list[AnnotationRecord]:
    """150-sample dual-rater journal with a fully pinned summary table.

    Binary contingency: 106 both-yes, 6 A-only, 8 B-only, 30 both-no, which
    gives rates 74.7 / 76.0 / 75.3 and binary kappa 0.7489. Quality
    multisets hit averages 2.96 / 3.41 / 3.19 and the bucket percentages
    35.3/26.0/38.7, 50.0/22.7/27.3, 42.7/24.3/33.0.
    """
    a_yes = [True] * 112 + [False] * 38
    b_yes = [True] * 106 + [False] * 6 + [True] * 8 + [False] * 30
    a_quality = [5] * 10 + [4] * 43 + [3] * 39 + [2] * 47 + [1] * 11
    b_sorted = [5] * 28 + [4] * 47 + [3] * 34 + [2] * 41
    # b's highest scores go to its yes samples, in sample order
    b_yes_idx = [i for i in range(150) if b_yes[i]]
    b_no_idx = [i for i in range(150) if not b_yes[i]]
    b_quality = [0] * 150
    for rank, idx in enumerate(b_yes_idx + b_no_idx):
        b_quality[idx] = b_sorted[rank]

    records = []
    for i in range(150):
        sid = f"s{i:03d}"
        records.append(AnnotationRecord(sid, "signer1", a_yes[i], a_quality[i], "t0"))
        records.append(AnnotationRecord(sid, "signer2", b_yes[i], b_quality[i], "t0"))
    return records


def write_journal(path, records: list[AnnotationRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json_obj(), ensure_ascii=False) + "\n")


@pytest.fixture(scope="session")
def toy_rules_path(tmp_path_factory) -> str:
    path = tmp_path_factory.mktemp("rules") / "toy.rules"
    path.write_text(TOY_RULES_TEXT, encoding="utf-8")
    return str(path)


@pytest.fixture(scope="session")
def toy_rules(toy_rules_path) -> RuleSet:
    return load_rules(toy_rules_path)


# ---------------------------------------------------------------------------
# acceptance summary: one visible pass/fail line per criterion

_acceptance_outcomes: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    _acceptance_outcomes[name] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in _acceptance_outcomes.items():
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  {name}")
