import logging
import random

import numpy as np
import pytest

from glossforge.backends import BackendError, EmbedderBackend, HashEmbedder, TokenHashEmbedder
from glossforge.corpus import Corpus, SentenceGlossPair, SplitRatios, split_corpus
from glossforge.retrieval import (
    EmbeddingIndex,
    IndexFormatError,
    RetrievalConfig,
    RetrievalError,
    RetrievalResult,
    build_index,
    cosine_similarity,
    fnv1a_64,
    load_index,
    query_index,
    save_index,
)

from conftest import VectorTableEmbedder, make_corpus


class FlakyEmbedder(EmbedderBackend):
    def __init__(self, inner, failures):
        self.inner = inner
        self.failures = failures
        self.name = inner.name
        self.dimension = inner.dimension
        self.calls = 0

    def embed(self, texts):
        self.calls += 1
        if self.calls <= self.failures:
            raise BackendError("transient")
        return self.inner.embed(texts)


def simple_corpus(sentences):
    return Corpus(tuple(
        SentenceGlossPair(id=f"e{i:03d}", sentence=s, gloss=("g",))
        for i, s in enumerate(sentences)
    ))


class TestCosine:
    def test_self_similarity_is_one(self):
        v = [0.3, -1.2, 4.0]
        assert cosine_similarity(v, v) == pytest.approx(1.0)

    def test_orthogonal_is_zero(self):
        assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0)

    def test_hand_value_inverse_sqrt2(self):
        assert cosine_similarity([1.0, 1.0], [1.0, 0.0]) == pytest.approx(0.7071, abs=1e-4)

    def test_dimension_mismatch(self):
        with pytest.raises(RetrievalError, match="dimension"):
            cosine_similarity([1.0, 2.0], [1.0, 2.0, 3.0])

    def test_zero_vector(self):
        with pytest.raises(RetrievalError, match="zero"):
            cosine_similarity([0.0, 0.0], [1.0, 0.0])


class TestBuildIndex:
    def test_800_train_pairs(self):
        corpus = split_corpus(make_corpus(1000), SplitRatios(seed=11))
        train = corpus.subset("train")
        idx = build_index(train, HashEmbedder(dimension=16, seed=0))
        assert len(idx) == 800

    def test_empty_train_set(self):
        with pytest.raises(RetrievalError, match="empty"):
            build_index(Corpus(()), HashEmbedder(dimension=8))

    def test_mock_embedder_byte_identical_persistence(self, tmp_path):
        train = make_corpus(20)
        be = HashEmbedder(dimension=16, seed=3)
        for run in (1, 2):
            save_index(build_index(train, be), tmp_path / f"run{run}.idx")
        assert (tmp_path / "run1.idx").read_bytes() == (tmp_path / "run2.idx").read_bytes()

    def test_normalized_at_insert(self):
        table = {"a": [3.0, 4.0], "b": [0.0, 2.0]}
        idx = build_index(simple_corpus(["a", "b"]), VectorTableEmbedder(table, 2))
        for row in idx.vectors:
            assert cosine_similarity(row, row) == pytest.approx(1.0, abs=1e-6)
            assert np.linalg.norm(row.astype(np.float64)) == pytest.approx(1.0, abs=1e-6)

    def test_dimension_drift_across_batches(self):
        class Drifting(EmbedderBackend):
            name = "drift"
            dimension = 2

            def embed(self, texts):
                return [[1.0, 0.0] if t < "m" else [1.0, 0.0, 0.0] for t in texts]

        with pytest.raises(RetrievalError, match="drift"):
            build_index(simple_corpus(["a", "z"]), Drifting(), batch_size=1)

    def test_retry_then_success(self):
        inner = HashEmbedder(dimension=8)
        flaky = FlakyEmbedder(inner, failures=2)
        idx = build_index(simple_corpus(["a", "b"]), flaky, retry_base_delay=0.001)
        assert len(idx) == 2 and flaky.calls == 3

    def test_retry_exhaustion(self):
        flaky = FlakyEmbedder(HashEmbedder(dimension=8), failures=99)
        with pytest.raises(BackendError, match="3 attempts"):
            build_index(simple_corpus(["a"]), flaky, retry_base_delay=0.001)


class TestQuery:
    def test_stored_sentence_scores_one(self):
        train = make_corpus(25)
        be = HashEmbedder(dimension=32, seed=5)
        idx = build_index(train, be)
        target = train.pairs[7]
        res = query_index(idx, target.sentence, RetrievalConfig(min_examples=1), be)
        assert res.matches[0][0] == target.id
        assert res.matches[0][1] == pytest.approx(1.0, abs=1e-6)

    def test_all_below_threshold_triggers_fallback(self):
        train = make_corpus(10)
        be = HashEmbedder(dimension=64, seed=5)
        idx = build_index(train, be)
        res = query_index(idx, "completely unrelated wording", RetrievalConfig(), be)
        assert res.matches == ()
        assert res.fallback_needed is True

    def test_cap_at_twenty_with_thirty_above_threshold(self):
        q = np.zeros(4)
        q[0] = 1.0
        table = {"query": q}
        sentences = []
        for i in range(30):
            name = f"close{i:02d}"
            v = np.array([1.0, 0.01 * i, 0.0, 0.0])
            table[name] = v / np.linalg.norm(v)
            sentences.append(name)
        for i in range(5):
            name = f"far{i}"
            table[name] = np.array([0.0, 0.0, 0.0, 1.0])
            sentences.append(name)
        be = VectorTableEmbedder(table, 4)
        idx = build_index(simple_corpus(sentences), be)
        res = query_index(idx, "query", RetrievalConfig(), be)
        assert len(res.matches) == 20
        assert res.fallback_needed is False
        assert all(score >= 0.5 for _, score in res.matches)

    def test_scores_descending_and_tiebreak_by_id(self):
        v = np.array([1.0, 0.0])
        table = {"query": v, "s_b": v, "s_a": v, "s_c": v}
        be = VectorTableEmbedder(table, 2)
        idx = build_index(simple_corpus(["s_b", "s_a", "s_c"]), be)
        res = query_index(idx, "query", RetrievalConfig(min_examples=1), be)
        # equal scores: ascending pair id order, by stored sentence e-ids
        ids_in_order = [idx.texts[idx.ids.index(pid)] for pid, _ in res.matches]
        assert ids_in_order == ["s_b", "s_a", "s_c"]  # e000 < e001 < e002

    def test_insertion_order_invariance(self):
        v1 = np.array([1.0, 0.0])
        v2 = np.array([0.9, 0.1])
        table = {"query": v1, "x": v1, "y": v2 / np.linalg.norm(v2), "z": v1}
        be = VectorTableEmbedder(table, 2)
        c1 = Corpus((
            SentenceGlossPair(id="ix", sentence="x", gloss=("g",)),
            SentenceGlossPair(id="iy", sentence="y", gloss=("g",)),
            SentenceGlossPair(id="iz", sentence="z", gloss=("g",)),
        ))
        c2 = Corpus(tuple(reversed(c1.pairs)))
        r1 = query_index(build_index(c1, be), "query", RetrievalConfig(min_examples=1), be)
        r2 = query_index(build_index(c2, be), "query", RetrievalConfig(min_examples=1), be)
        assert [m[0] for m in r1.matches] == [m[0] for m in r2.matches]

    def test_fallback_flag_random_policy(self):
        rng = random.Random(99)
        for _ in range(200):
            cap = rng.randint(1, 10)
            cfg = RetrievalConfig(threshold=rng.uniform(-0.5, 0.9), cap=cap,
                                  min_examples=rng.randint(0, cap))
            n = rng.randint(0, 15)
            matches = [(f"m{i}", rng.uniform(cfg.threshold, 1.0)) for i in range(n)]
            res = RetrievalResult.from_matches(matches, cfg)
            assert len(res.matches) <= cfg.cap
            assert res.fallback_needed == (len(res.matches) < cfg.min_examples)
            scores = [s for _, s in res.matches]
            assert scores == sorted(scores, reverse=True)

    def test_config_validation(self):
        with pytest.raises(RetrievalError):
            RetrievalConfig(threshold=1.5)
        with pytest.raises(RetrievalError):
            RetrievalConfig(cap=0)
        with pytest.raises(RetrievalError):
            RetrievalConfig(min_examples=30, cap=20)

    def test_token_hash_similarity_is_graded(self):
        be = TokenHashEmbedder(dimension=64, seed=0)
        idx = build_index(simple_corpus(["ami bhat kori", "she gan korbo"]), be)
        res = query_index(idx, "ami bhat korbo", RetrievalConfig(threshold=0.5, min_examples=1), be)
        assert res.matches and res.matches[0][0] == "e000"


class TestPersistence:
    def test_round_trip_equality(self, tmp_path):
        be = HashEmbedder(dimension=16, seed=2)
        idx = build_index(make_corpus(5), be)
        path = tmp_path / "small.idx"
        save_index(idx, path)
        loaded = load_index(path)
        assert loaded.ids == idx.ids
        assert loaded.texts == idx.texts
        assert loaded.backend_name == idx.backend_name
        assert loaded.dimension == idx.dimension
        assert np.array_equal(loaded.vectors, idx.vectors)

    def test_truncated_file_fails_checksum(self, tmp_path):
        path = tmp_path / "t.idx"
        save_index(build_index(make_corpus(5), HashEmbedder(dimension=8)), path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(IndexFormatError, match="checksum"):
            load_index(path)

    def test_corrupted_byte_fails_checksum(self, tmp_path):
        path = tmp_path / "c.idx"
        save_index(build_index(make_corpus(3), HashEmbedder(dimension=8)), path)
        data = bytearray(path.read_bytes())
        data[len(data) // 3] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(IndexFormatError, match="checksum"):
            load_index(path)

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "v.idx"
        save_index(build_index(make_corpus(2), HashEmbedder(dimension=8)), path)
        text = path.read_text(encoding="utf-8").splitlines()
        text[0] = text[0].replace("v1", "v2")
        body = "".join(line + "\n" for line in text[:-1])
        path.write_text(body + f"checksum={fnv1a_64(body.encode()):016x}\n", encoding="utf-8")
        with pytest.raises(IndexFormatError, match="version"):
            load_index(path)

    def test_backend_mismatch_warns_and_proceeds(self, tmp_path, caplog):
        path = tmp_path / "b.idx"
        save_index(build_index(make_corpus(2), HashEmbedder(dimension=8, seed=1)), path)
        with caplog.at_level(logging.WARNING, logger="glossforge.retrieval"):
            loaded = load_index(path, expect_backend="other-backend")
        assert loaded is not None
        assert any("backend" in rec.message for rec in caplog.records)

    def test_norm_validation_on_load(self, tmp_path):
        header = "glossforge-index v1 dim=2 backend=x"
        entry = '{"id": "a", "vec": [3.0, 4.0], "text": "t"}'
        body = header + "\n" + entry + "\n"
        path = tmp_path / "n.idx"
        path.write_text(body + f"checksum={fnv1a_64(body.encode()):016x}\n", encoding="utf-8")
        with pytest.raises(RetrievalError, match="unit"):
            load_index(path)
