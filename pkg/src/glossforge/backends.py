"""Remote backend contracts (embedder, chat LLM, fill-mask) and offline mocks.

All three remote services speak JSON over HTTP POST:

    embedder:  {"texts": [...]}                      -> {"vectors": [[...], ...]}
    chat:      {"model", "messages", "temperature",
                "max_tokens"}                        -> {"choices": [{"message": {"content": ...}}]}
    fill-mask: {"text_with_mask", "top_k"}           -> {"candidates": [{"token", "score"}, ...]}

The mocks are deterministic so the whole pipeline runs offline and
reproducibly in tests.
"""
from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass

import numpy as np
import requests

from . import GlossforgeError
from .corpus import nfc


class BackendError(GlossforgeError):
    pass


@dataclass(frozen=True)
class GenerationParams:
    model_id: str = "mock"
    temperature: float = 0.0
    max_output_tokens: int = 256
    timeout: float = 30.0

    def __post_init__(self):
        if self.temperature < 0:
            raise BackendError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_output_tokens < 1:
            raise BackendError("max_output_tokens must be positive")


def post_json_with_retry(
    url: str,
    payload: dict,
    timeout: float = 30.0,
    attempts: int = 3,
    base_delay: float = 0.5,
    headers: dict | None = None,
    session: requests.Session | None = None,
) -> dict:
    """POST JSON with bounded retries and exponential backoff.

    Retries on connection errors, timeouts and 5xx responses; anything else
    (including 4xx) fails immediately.
    """
    sess = session or requests
    last: Exception | None = None
    for attempt in range(attempts):
        try:
            resp = sess.post(url, json=payload, timeout=timeout, headers=headers)
            if resp.status_code >= 500:
                last = BackendError(f"{url}: server error {resp.status_code}")
            elif resp.status_code != 200:
                raise BackendError(f"{url}: unexpected status {resp.status_code}")
            else:
                return resp.json()
        except BackendError:
            raise
        except requests.RequestException as exc:
            last = exc
        if attempt < attempts - 1:
            time.sleep(base_delay * (2 ** attempt))
    raise BackendError(f"{url}: failed after {attempts} attempts: {last}")


# ---------------------------------------------------------------------------
# embedders

class EmbedderBackend:
    """Contract: deterministic embed() returning fixed-dimension vectors."""

    name: str = "base"
    dimension: int = 0

    def embed(self, texts: list[str]) -> list[list[float]]:
        raise NotImplementedError


class HttpEmbedderBackend(EmbedderBackend):
    def __init__(self, url: str, dimension: int, name: str = "http", api_key: str | None = None,
                 timeout: float = 30.0):
        self.url = url
        self.dimension = dimension
        self.name = name
        self.timeout = timeout
        self._headers = {"Authorization": f"Bearer {api_key}"} if api_key else None

    def embed(self, texts: list[str]) -> list[list[float]]:
        data = post_json_with_retry(
            self.url, {"texts": list(texts)}, timeout=self.timeout, headers=self._headers
        )
        vectors = data.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise BackendError(f"{self.url}: malformed embedder response")
        return vectors


def _hash_unit_vector(key: str, dim: int) -> np.ndarray:
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "big")
    rng = np.random.Generator(np.random.PCG64(seed))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


class HashEmbedder(EmbedderBackend):
    """Maps each text to a seeded pseudo-random unit vector.

    Identical texts embed identically (cosine 1.0); unrelated texts land
    near-orthogonal for reasonable dimensions. Purely offline.
    """

    def __init__(self, dimension: int = 64, seed: int = 0):
        self.dimension = dimension
        self.seed = seed
        self.name = f"mock-hash-d{dimension}-s{seed}"

    def embed(self, texts: list[str]) -> list[list[float]]:
        return [
            _hash_unit_vector(f"{self.seed}:{nfc(t)}", self.dimension).tolist()
            for t in texts
        ]


class TokenHashEmbedder(EmbedderBackend):
    """Bag-of-token-hash embedder: sentences sharing tokens score high.

    Unlike HashEmbedder this gives graded similarity, which makes the
    few-shot retrieval branch reachable in offline pipelines.
    """

    def __init__(self, dimension: int = 64, seed: int = 0):
        self.dimension = dimension
        self.seed = seed
        self.name = f"mock-tokenhash-d{dimension}-s{seed}"

    def embed(self, texts: list[str]) -> list[list[float]]:
        out = []
        for text in texts:
            tokens = nfc(text).split()
            if not tokens:
                raise BackendError("cannot embed an empty text")
            v = np.zeros(self.dimension)
            for tok in tokens:
                v += _hash_unit_vector(f"{self.seed}:{tok}", self.dimension)
            norm = np.linalg.norm(v)
            if norm == 0:
                raise BackendError(f"degenerate token-hash vector for {text!r}")
            out.append((v / norm).tolist())
        return out


# ---------------------------------------------------------------------------
# chat LLMs

class LlmBackend:
    """Contract: complete() always returns text or raises, never hangs."""

    def complete(self, system: str, user: str, params: GenerationParams) -> str:
        raise NotImplementedError


class HttpChatBackend(LlmBackend):
    def __init__(self, url: str, api_key: str | None = None):
        self.url = url
        self._headers = {"Authorization": f"Bearer {api_key}"} if api_key else None

    def complete(self, system: str, user: str, params: GenerationParams) -> str:
        payload = {
            "model": params.model_id,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": params.temperature,
            "max_tokens": params.max_output_tokens,
        }
        data = post_json_with_retry(
            self.url, payload, timeout=params.timeout, headers=self._headers
        )
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"{self.url}: malformed chat response") from exc
        if not isinstance(content, str):
            raise BackendError(f"{self.url}: chat content is not text")
        return content


def _last_nonempty_line(text: str) -> str:
    for line in reversed(text.splitlines()):
        if line.strip():
            return line.strip()
    return ""


class MockChatBackend(LlmBackend):
    """Deterministic stand-in tied to the shipped prompt templates.

    Tense prompts get `tense_answer` (or a ruleset-driven detection of the
    final prompt line). Few-shot gloss prompts echo the first example's
    gloss; fallback gloss prompts echo the target sentence's own tokens.
    """

    def __init__(self, tense_answer: str | None = None, ruleset=None):
        self.tense_answer = tense_answer
        self.ruleset = ruleset
        self.calls: list[tuple[str, str]] = []

    def complete(self, system: str, user: str, params: GenerationParams) -> str:
        self.calls.append((system, user))
        if "tense" in system.lower():
            if self.tense_answer:
                return self.tense_answer
            if self.ruleset is not None:
                from .rules import detect_tense

                return detect_tense(_last_nonempty_line(user), self.ruleset)
            return "present"
        if "\nExamples:\n" in user:
            block = user.split("\nExamples:\n", 1)[1]
            for line in block.splitlines():
                if " => " in line:
                    return line.split(" => ", 1)[1].strip()
            raise BackendError("mock: examples block without example lines")
        return _last_nonempty_line(user)


# ---------------------------------------------------------------------------
# fill-mask

class FillMaskBackend:
    """Contract: candidates() returns at most k (token, score), best first."""

    def candidates(self, masked_sentence: str, k: int) -> list[tuple[str, float]]:
        raise NotImplementedError


class HttpFillMaskBackend(FillMaskBackend):
    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout

    def candidates(self, masked_sentence: str, k: int) -> list[tuple[str, float]]:
        data = post_json_with_retry(
            self.url, {"text_with_mask": masked_sentence, "top_k": k}, timeout=self.timeout
        )
        raw = data.get("candidates")
        if not isinstance(raw, list):
            raise BackendError(f"{self.url}: malformed fill-mask response")
        out = [(str(c["token"]), float(c["score"])) for c in raw[:k]]
        return sorted(out, key=lambda ts: -ts[1])


class TableFillMaskBackend(FillMaskBackend):
    """Maps masked sentences to fixed candidate lists; misses return []."""

    def __init__(self, table: dict[str, list[tuple[str, float]]]):
        self.table = {nfc(k): v for k, v in table.items()}

    def candidates(self, masked_sentence: str, k: int) -> list[tuple[str, float]]:
        hits = self.table.get(nfc(masked_sentence), [])
        return sorted(hits, key=lambda ts: -ts[1])[:k]


_MOCK_FILL_VOCAB = (
    "বই",        # boi (book)
    "গাছ",   # gach (tree)
    "পাখি",  # pakhi (bird)
    "নদী",   # nodi (river)
    "ফুল",   # phul (flower)
    "ঘর",         # ghor (house)
    "গান",   # gaan (song)
    "ছবি",   # chhobi (picture)
)


class MockFillMaskBackend(FillMaskBackend):
    """Deterministic fill-mask: picks vocabulary words by hashing the context."""

    def __init__(self, vocab: tuple[str, ...] = _MOCK_FILL_VOCAB, seed: int = 0):
        self.vocab = vocab
        self.seed = seed

    def candidates(self, masked_sentence: str, k: int) -> list[tuple[str, float]]:
        digest = hashlib.sha256(f"{self.seed}:{nfc(masked_sentence)}".encode()).digest()
        start = digest[0] % len(self.vocab)
        picks = [self.vocab[(start + i) % len(self.vocab)] for i in range(min(k, len(self.vocab)))]
        return [(tok, round(0.9 - 0.1 * i, 4)) for i, tok in enumerate(picks)]
