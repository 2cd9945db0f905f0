"""Exact in-memory vector index over training pairs, with on-disk persistence.

At a few hundred entries brute-force scoring is a single matrix-vector
product, so there is no approximate-nearest-neighbor machinery here. The
index file is line-oriented:

    glossforge-index v1 dim=<D> backend=<name>
    {"id": ..., "vec": [...], "text": ...}          one object per entry
    checksum=<hex of 64-bit FNV-1a over all preceding bytes>

Vectors are stored L2-normalized as float32; serialization round-trips
byte-identically.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import GlossforgeError
from .backends import BackendError, EmbedderBackend
from .corpus import Corpus, nfc

log = logging.getLogger("glossforge.retrieval")

INDEX_HEADER_PREFIX = "glossforge-index"
INDEX_VERSION = "v1"

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


class RetrievalError(GlossforgeError):
    pass


class IndexFormatError(RetrievalError):
    pass


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def cosine_similarity(a, b) -> float:
    """a.b / (|a||b|); rejects zero vectors and mismatched dimensions."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape or va.ndim != 1:
        raise RetrievalError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    na = np.linalg.norm(va)
    nb = np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        raise RetrievalError("cosine similarity is undefined for zero vectors")
    return float(np.dot(va, vb) / (na * nb))


@dataclass(frozen=True)
class RetrievalConfig:
    threshold: float = 0.5
    cap: int = 20
    min_examples: int = 3
    metric: str = "cosine"

    def __post_init__(self):
        if not (-1.0 <= self.threshold <= 1.0):
            raise RetrievalError(f"threshold {self.threshold} outside [-1, 1]")
        if self.cap <= 0:
            raise RetrievalError("cap must be positive")
        if not (0 <= self.min_examples <= self.cap):
            raise RetrievalError("min_examples must be in [0, cap]")
        if self.metric not in ("cosine", "dot"):
            raise RetrievalError(f"unknown metric {self.metric!r}")


@dataclass(frozen=True)
class RetrievalResult:
    matches: tuple[tuple[str, float], ...]
    fallback_needed: bool

    @classmethod
    def from_matches(cls, matches: list[tuple[str, float]], cfg: RetrievalConfig) -> "RetrievalResult":
        """Sort (score desc, id asc), truncate to cap, set the fallback flag."""
        ordered = sorted(matches, key=lambda m: (-m[1], m[0]))[: cfg.cap]
        return cls(tuple(ordered), len(ordered) < cfg.min_examples)


class EmbeddingIndex:
    """Unit vectors over training sentences, queried by similarity."""

    def __init__(self, ids: list[str], vectors: np.ndarray, texts: list[str], backend_name: str):
        if len(ids) != len(texts) or vectors.shape[0] != len(ids):
            raise RetrievalError("ids, vectors and texts must have equal length")
        if len(set(ids)) != len(ids):
            raise RetrievalError("duplicate pair ids in index")
        vectors = np.asarray(vectors, dtype=np.float32)
        norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
        if len(ids) and not np.allclose(norms, 1.0, atol=1e-6):
            raise RetrievalError("index vectors must be unit length (within 1e-6)")
        self.ids = list(ids)
        self.vectors = vectors
        self.texts = [nfc(t) for t in texts]
        self.backend_name = backend_name
        self.dimension = int(vectors.shape[1]) if vectors.size else 0

    def __len__(self) -> int:
        return len(self.ids)

    def text_of(self, pair_id: str) -> str:
        return self.texts[self.ids.index(pair_id)]


def _embed_with_retry(backend: EmbedderBackend, texts: list[str], attempts: int = 3,
                      base_delay: float = 0.2) -> list[list[float]]:
    last: Exception | None = None
    for attempt in range(attempts):
        try:
            return backend.embed(texts)
        except BackendError as exc:
            last = exc
            if attempt < attempts - 1:
                time.sleep(base_delay * (2 ** attempt))
    raise BackendError(f"embedder {backend.name!r} failed after {attempts} attempts: {last}")


def build_index(train: Corpus, backend: EmbedderBackend, batch_size: int = 32,
                retry_base_delay: float = 0.2) -> EmbeddingIndex:
    """Embed every training sentence and normalize at insert.

    Each batch gets 3 attempts with exponential backoff; a dimension change
    between batches aborts the build.
    """
    if len(train) == 0:
        raise RetrievalError("cannot build an index from an empty training set")
    ids: list[str] = []
    texts: list[str] = []
    rows: list[np.ndarray] = []
    dim: int | None = None
    pairs = list(train.pairs)
    for start in range(0, len(pairs), batch_size):
        batch = pairs[start : start + batch_size]
        vectors = _embed_with_retry(backend, [p.sentence for p in batch],
                                    base_delay=retry_base_delay)
        for p, vec in zip(batch, vectors):
            v = np.asarray(vec, dtype=np.float64)
            if dim is None:
                dim = v.shape[0]
            elif v.shape[0] != dim:
                raise RetrievalError(
                    f"embedding dimension drift: got {v.shape[0]}, expected {dim}"
                )
            norm = np.linalg.norm(v)
            if norm == 0.0:
                raise RetrievalError(f"zero embedding for pair {p.id!r}")
            ids.append(p.id)
            texts.append(p.sentence)
            rows.append((v / norm).astype(np.float32))
    return EmbeddingIndex(ids, np.vstack(rows), texts, backend.name)


def query_index(idx: EmbeddingIndex, sentence: str, cfg: RetrievalConfig,
                backend: EmbedderBackend) -> RetrievalResult:
    """Score the query against every entry and apply threshold, cap, fallback.

    Ties on equal scores break by ascending pair id, so insertion order
    never shows through.
    """
    if len(idx) == 0:
        raise RetrievalError("cannot query an empty index")
    vec = np.asarray(_embed_with_retry(backend, [sentence])[0], dtype=np.float64)
    if vec.shape[0] != idx.dimension:
        raise RetrievalError(
            f"query dimension {vec.shape[0]} != index dimension {idx.dimension}"
        )
    if cfg.metric == "cosine":
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            raise RetrievalError("query embedded to a zero vector")
        vec = vec / norm
    scores = idx.vectors.astype(np.float64) @ vec
    matches = [
        (idx.ids[i], float(scores[i])) for i in np.flatnonzero(scores >= cfg.threshold)
    ]
    return RetrievalResult.from_matches(matches, cfg)


def _format_vec(vector: np.ndarray) -> list[float]:
    # float32 -> Python float is exact, so json round-trips losslessly
    return [float(x) for x in vector]


def save_index(idx: EmbeddingIndex, path: str | Path) -> None:
    path = Path(path)
    lines = [f"{INDEX_HEADER_PREFIX} {INDEX_VERSION} dim={idx.dimension} backend={idx.backend_name}"]
    for pid, vec, text in zip(idx.ids, idx.vectors, idx.texts):
        lines.append(json.dumps({"id": pid, "vec": _format_vec(vec), "text": text},
                                ensure_ascii=False))
    body = "".join(line + "\n" for line in lines)
    payload = body.encode("utf-8")
    checksum = f"checksum={fnv1a_64(payload):016x}\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(body)
        fh.write(checksum)


def load_index(path: str | Path, expect_backend: str | None = None) -> EmbeddingIndex:
    """Read an index file, verifying checksum, version, dimension and norms.

    A backend name different from `expect_backend` logs a warning and
    proceeds; scores from mismatched embedders are still well-formed,
    merely meaningless.
    """
    path = Path(path)
    raw = path.read_bytes()
    # checksum is verified on raw bytes so corruption never surfaces as a
    # decode error
    marker = raw.rfind(b"\nchecksum=")
    if marker == -1 or not raw.endswith(b"\n"):
        raise IndexFormatError(f"{path}: missing checksum line")
    body_bytes = raw[: marker + 1]
    claimed = raw[marker + 1 : -1].decode("ascii", errors="replace")[len("checksum="):]
    if claimed != f"{fnv1a_64(body_bytes):016x}":
        raise IndexFormatError(f"{path}: checksum mismatch (file corrupt or truncated)")
    try:
        lines = body_bytes.decode("utf-8").split("\n")[:-1]
    except UnicodeDecodeError as exc:
        raise IndexFormatError(f"{path}: index body is not UTF-8") from exc
    if not lines:
        raise IndexFormatError(f"{path}: empty index file")

    header = lines[0].split()
    if len(header) != 4 or header[0] != INDEX_HEADER_PREFIX:
        raise IndexFormatError(f"{path}: bad header {lines[0]!r}")
    if header[1] != INDEX_VERSION:
        raise IndexFormatError(f"{path}: unsupported index version {header[1]!r}")
    if not header[2].startswith("dim=") or not header[3].startswith("backend="):
        raise IndexFormatError(f"{path}: bad header {lines[0]!r}")
    dim = int(header[2][len("dim="):])
    backend_name = header[3][len("backend="):]
    if expect_backend is not None and backend_name != expect_backend:
        log.warning(
            "index %s was built with backend %r, expected %r; proceeding",
            path, backend_name, expect_backend,
        )

    ids: list[str] = []
    texts: list[str] = []
    rows: list[np.ndarray] = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IndexFormatError(f"{path}:{lineno}: malformed entry") from exc
        vec = np.asarray(obj["vec"], dtype=np.float32)
        if vec.shape[0] != dim:
            raise IndexFormatError(
                f"{path}:{lineno}: entry dimension {vec.shape[0]} != header dim {dim}"
            )
        ids.append(obj["id"])
        texts.append(obj["text"])
        rows.append(vec)
    if not ids:
        raise IndexFormatError(f"{path}: index has no entries")
    return EmbeddingIndex(ids, np.vstack(rows), texts, backend_name)
