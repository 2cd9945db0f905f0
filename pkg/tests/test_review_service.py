import threading

import pytest
import requests

from glossforge.review_service import ReviewStore, serve_review
from glossforge.validation import read_journal

from conftest import make_corpus, table1_records


@pytest.fixture
def service(tmp_path):
    corpus = make_corpus(6)
    store = ReviewStore(list(corpus.pairs), tmp_path / "journal.jsonl")
    server = serve_review(store, port=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    yield base, store, tmp_path / "journal.jsonl"
    server.shutdown()
    server.server_close()


def rate_all(base, rater, understandable=True, quality=4):
    seen = []
    while True:
        resp = requests.get(f"{base}/api/review/next", params={"rater": rater}, timeout=5)
        if resp.status_code == 204:
            return seen
        payload = resp.json()
        seen.append(payload["sample_id"])
        post = requests.post(
            f"{base}/api/review/{payload['sample_id']}",
            json={"rater": rater, "understandable": understandable, "quality": quality},
            timeout=5,
        )
        assert post.status_code == 200


class TestEndpoints:
    def test_next_serves_in_sampled_order(self, service):
        base, store, _ = service
        resp = requests.get(f"{base}/api/review/next", params={"rater": "a"}, timeout=5)
        assert resp.status_code == 200
        body = resp.json()
        assert body["sample_id"] == store.samples[0].id
        assert body["sentence"] == store.samples[0].sentence
        assert body["gloss"] == list(store.samples[0].gloss)

    def test_full_flow_and_report(self, service):
        base, store, journal = service
        seen_a = rate_all(base, "a", True, 4)
        assert seen_a == [p.id for p in store.samples]

        resp = requests.get(f"{base}/api/report", timeout=5)
        assert resp.status_code == 409  # only one rater finished

        rate_all(base, "b", True, 3)
        resp = requests.get(f"{base}/api/report", timeout=5)
        assert resp.status_code == 200
        report = resp.json()
        assert report["n_samples"] == 6
        assert report["kappa_binary"]["kappa"] == 1.0
        assert report["per_rater"]["a"]["avg_quality"] == 4.0

        records = read_journal(journal)
        assert len(records) == 12

    def test_progress(self, service):
        base, store, _ = service
        resp = requests.get(f"{base}/api/progress", params={"rater": "a"}, timeout=5)
        assert resp.json() == {"done": 0, "total": 6}
        rate_all(base, "a")
        resp = requests.get(f"{base}/api/progress", params={"rater": "a"}, timeout=5)
        assert resp.json() == {"done": 6, "total": 6}

    def test_422_on_violations(self, service):
        base, store, _ = service
        sid = store.samples[0].id
        bad_bodies = [
            {"rater": "a", "understandable": True, "quality": 0},
            {"rater": "a", "understandable": True, "quality": 6},
            {"rater": "a", "understandable": True, "quality": "3"},
            {"rater": "a", "understandable": True, "quality": True},
            {"rater": "a", "understandable": "yes", "quality": 3},
            {"rater": "", "understandable": True, "quality": 3},
        ]
        for body in bad_bodies:
            resp = requests.post(f"{base}/api/review/{sid}", json=body, timeout=5)
            assert resp.status_code == 422, body
        resp = requests.post(f"{base}/api/review/not-a-sample",
                             json={"rater": "a", "understandable": True, "quality": 3}, timeout=5)
        assert resp.status_code == 422
        resp = requests.post(f"{base}/api/review/{sid}", data=b"{not json",
                             timeout=5)
        assert resp.status_code == 422

    def test_missing_rater_param(self, service):
        base, _, _ = service
        assert requests.get(f"{base}/api/review/next", timeout=5).status_code == 422
        assert requests.get(f"{base}/api/progress", timeout=5).status_code == 422

    def test_resubmission_replaces(self, service):
        base, store, journal = service
        sid = store.samples[0].id
        for quality in (2, 5):
            requests.post(f"{base}/api/review/{sid}",
                          json={"rater": "a", "understandable": True, "quality": quality},
                          timeout=5)
        records = read_journal(journal)
        assert len(records) == 2  # journal is append-only
        assert store.next_for("a").id == store.samples[1].id

    def test_unknown_path_404(self, service):
        base, _, _ = service
        assert requests.get(f"{base}/api/nope", timeout=5).status_code == 404


class TestPersistence:
    def test_journal_resume(self, tmp_path):
        corpus = make_corpus(3)
        journal = tmp_path / "j.jsonl"
        store1 = ReviewStore(list(corpus.pairs), journal)
        store1.submit(corpus.pairs[0].id, "a", True, 4)
        store1.submit(corpus.pairs[1].id, "a", False, 2)
        store2 = ReviewStore(list(corpus.pairs), journal)
        assert store2.next_for("a").id == corpus.pairs[2].id
        assert store2.progress("a") == (2, 3)

    def test_concurrent_submissions(self, tmp_path):
        corpus = make_corpus(40)
        journal = tmp_path / "j.jsonl"
        store = ReviewStore(list(corpus.pairs), journal)

        def worker(rater):
            for p in corpus.pairs:
                store.submit(p.id, rater, True, 3)

        threads = [threading.Thread(target=worker, args=(r,)) for r in ("a", "b")]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        records = read_journal(journal)
        assert len(records) == 80
        report = store.report()
        assert report.n_samples == 40


class TestStatic:
    def test_serves_ui_files(self, tmp_path):
        corpus = make_corpus(2)
        ui = tmp_path / "ui"
        ui.mkdir()
        (ui / "index.html").write_text("<html><body>review</body></html>", encoding="utf-8")
        (ui / "app.js").write_text("console.log('x')", encoding="utf-8")
        store = ReviewStore(list(corpus.pairs), tmp_path / "j.jsonl")
        server = serve_review(store, port=0, ui_dir=ui)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        base = f"http://127.0.0.1:{server.server_address[1]}"
        try:
            root = requests.get(base + "/", timeout=5)
            assert root.status_code == 200 and "review" in root.text
            js = requests.get(base + "/app.js", timeout=5)
            assert js.status_code == 200
            assert js.headers["Content-Type"].startswith("text/javascript")
            assert requests.get(base + "/../etc/passwd", timeout=5).status_code == 404
            assert requests.get(base + "/missing.css", timeout=5).status_code == 404
        finally:
            server.shutdown()
            server.server_close()
