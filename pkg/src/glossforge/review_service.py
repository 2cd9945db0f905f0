"""HTTP review service for the two expert raters.

Endpoints (JSON):
    GET  /api/review/next?rater=<id>   next unreviewed sample, 204 when done
    POST /api/review/<sample_id>       {rater, understandable, quality}; 422 on violation
    GET  /api/report                   ValidationReport; 409 until two raters finished
    GET  /api/progress?rater=<id>      {done, total}

Submissions append to the JSONL annotation journal under a lock (single
writer, atomic lines); report computation snapshots the in-memory state.
With a ui_dir the server also serves the static review frontend.
"""
from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .corpus import SentenceGlossPair
from .validation import (
    AnnotationRecord,
    ValidationError,
    ValidationReport,
    append_record,
    build_report,
    latest_records,
    now_iso,
    read_journal,
)

log = logging.getLogger("glossforge.review")

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
    ".svg": "image/svg+xml",
}


class ReviewStore:
    """Sampled pairs in review order plus the annotation journal."""

    def __init__(self, samples: list[SentenceGlossPair], journal_path: str | Path,
                 quality_weighting: str = "none"):
        self.samples = list(samples)
        self.journal_path = Path(journal_path)
        self.quality_weighting = quality_weighting
        self._lock = threading.Lock()
        self._records = latest_records(read_journal(self.journal_path))

    def next_for(self, rater: str) -> SentenceGlossPair | None:
        with self._lock:
            for p in self.samples:
                if (p.id, rater) not in self._records:
                    return p
        return None

    def submit(self, sample_id: str, rater: str, understandable, quality) -> AnnotationRecord:
        if not any(p.id == sample_id for p in self.samples):
            raise ValidationError(f"unknown sample_id {sample_id!r}")
        if not isinstance(quality, int) or isinstance(quality, bool):
            raise ValidationError("quality must be an integer in 1..5")
        record = AnnotationRecord(
            sample_id=sample_id,
            rater_id=str(rater or ""),
            understandable=understandable,
            quality=quality,
            created_at=now_iso(),
        )
        with self._lock:
            append_record(self.journal_path, record)
            self._records[(record.sample_id, record.rater_id)] = record
        log.info("pair id=%s action=review outcome=recorded rater=%s", sample_id, rater)
        return record

    def progress(self, rater: str) -> tuple[int, int]:
        with self._lock:
            done = sum(1 for p in self.samples if (p.id, rater) in self._records)
        return done, len(self.samples)

    def report(self) -> ValidationReport:
        with self._lock:
            records = list(self._records.values())
        return build_report(records, quality_weighting=self.quality_weighting)


def make_handler(store: ReviewStore, ui_dir: Path | None):
    class ReviewHandler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):
            log.debug("http %s", fmt % args)

        def _send_json(self, status: int, obj: dict) -> None:
            body = json.dumps(obj, ensure_ascii=False).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            url = urlparse(self.path)
            query = parse_qs(url.query)
            if url.path == "/api/review/next":
                rater = (query.get("rater") or [""])[0]
                if not rater:
                    return self._send_json(422, {"error": "missing rater parameter"})
                nxt = store.next_for(rater)
                if nxt is None:
                    self.send_response(204)
                    self.send_header("Content-Length", "0")
                    self.end_headers()
                    return None
                return self._send_json(200, {
                    "sample_id": nxt.id, "sentence": nxt.sentence, "gloss": list(nxt.gloss),
                })
            if url.path == "/api/progress":
                rater = (query.get("rater") or [""])[0]
                if not rater:
                    return self._send_json(422, {"error": "missing rater parameter"})
                done, total = store.progress(rater)
                return self._send_json(200, {"done": done, "total": total})
            if url.path == "/api/report":
                try:
                    report = store.report()
                except ValidationError as exc:
                    return self._send_json(409, {"error": str(exc)})
                return self._send_json(200, report.to_json_obj())
            return self._serve_static(url.path)

        def do_POST(self):
            url = urlparse(self.path)
            prefix = "/api/review/"
            if not url.path.startswith(prefix) or url.path == "/api/review/next":
                return self._send_json(404, {"error": "not found"})
            sample_id = url.path[len(prefix):]
            try:
                length = int(self.headers.get("Content-Length", "0"))
                payload = json.loads(self.rfile.read(length).decode("utf-8"))
                if not isinstance(payload, dict):
                    raise ValidationError("body must be a JSON object")
                store.submit(
                    sample_id=sample_id,
                    rater=payload.get("rater", ""),
                    understandable=payload.get("understandable"),
                    quality=payload.get("quality"),
                )
            except (json.JSONDecodeError, UnicodeDecodeError):
                return self._send_json(422, {"error": "body is not valid JSON"})
            except ValidationError as exc:
                return self._send_json(422, {"error": str(exc)})
            return self._send_json(200, {"ok": True})

        def _serve_static(self, path: str):
            if ui_dir is None:
                return self._send_json(404, {"error": "not found"})
            rel = path.lstrip("/") or "index.html"
            target = (ui_dir / rel).resolve()
            if not str(target).startswith(str(ui_dir.resolve())) or not target.is_file():
                return self._send_json(404, {"error": "not found"})
            body = target.read_bytes()
            self.send_response(200)
            ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

    return ReviewHandler


def serve_review(store: ReviewStore, host: str = "127.0.0.1", port: int = 8765,
                 ui_dir: str | Path | None = None) -> ThreadingHTTPServer:
    """Bind the review server; caller decides between serve_forever and a thread."""
    handler = make_handler(store, Path(ui_dir) if ui_dir else None)
    return ThreadingHTTPServer((host, port), handler)
