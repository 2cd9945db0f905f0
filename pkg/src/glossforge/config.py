"""Flat key-value pipeline configuration with environment overrides.

Config files are UTF-8 lines of `section.key = value`; `#` starts a
comment. Backend endpoints may instead come from the environment
(GLOSSFORGE_LLM_URL, GLOSSFORGE_EMBED_URL, GLOSSFORGE_FILLMASK_URL), which
wins over the file. The API key is environment-only (GLOSSFORGE_LLM_KEY);
a key in the config file is rejected so secrets never land in versioned
files.
"""
from __future__ import annotations

import os
import re
from pathlib import Path

from . import GlossforgeError

ENV_OVERRIDES = {
    "GLOSSFORGE_LLM_URL": "backends.llm_url",
    "GLOSSFORGE_EMBED_URL": "backends.embed_url",
    "GLOSSFORGE_FILLMASK_URL": "backends.fillmask_url",
}

KNOWN_KEYS = {
    "corpus.manual",
    "corpus.external",
    "split.train",
    "split.dev",
    "split.test",
    "split.seed",
    "rules.path",
    "retrieval.threshold",
    "retrieval.cap",
    "retrieval.min_examples",
    "retrieval.metric",
    "retrieval.dim",
    "backends.mode",
    "backends.llm_model",
    "backends.llm_url",
    "backends.embed_url",
    "backends.fillmask_url",
    "prompts.dir",
    "masking.k",
    "masking.stoplist",
    "review.port",
    "pipeline.rule_ratio",
    "pipeline.mask_ratio",
    "pipeline.rag_ratio",
    "pipeline.concurrency",
    "output.dir",
}

DEFAULTS = {
    "split.train": "0.8",
    "split.dev": "0.1",
    "split.test": "0.1",
    "split.seed": "0",
    "retrieval.threshold": "0.5",
    "retrieval.cap": "20",
    "retrieval.min_examples": "3",
    "retrieval.metric": "cosine",
    "retrieval.dim": "64",
    "backends.mode": "mock",
    "backends.llm_model": "mock",
    "masking.k": "1",
    "review.port": "8765",
    "pipeline.rule_ratio": "0.5",
    "pipeline.mask_ratio": "0.5",
    "pipeline.rag_ratio": "2.0",
    "pipeline.concurrency": "4",
}

_LINE_RE = re.compile(r"^([a-z_]+\.[a-z_]+)\s*=\s*(.*)$")


class ConfigError(GlossforgeError):
    pass


class PipelineConfig:
    def __init__(self, values: dict[str, str], base_dir: Path | None = None):
        self.values = dict(DEFAULTS)
        self.values.update(values)
        self.base_dir = base_dir or Path.cwd()
        for env, key in ENV_OVERRIDES.items():
            if os.environ.get(env):
                self.values[key] = os.environ[env]

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        values: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                m = _LINE_RE.match(line)
                if not m:
                    raise ConfigError(f"{path}:{lineno}: expected 'section.key = value'")
                key, value = m.group(1), m.group(2).strip()
                if key == "backends.llm_key":
                    raise ConfigError(
                        f"{path}:{lineno}: secrets belong in GLOSSFORGE_LLM_KEY, not the config file"
                    )
                if key not in KNOWN_KEYS:
                    raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
                values[key] = value
        return cls(values, base_dir=path.parent)

    def get(self, key: str) -> str:
        if key not in self.values or not self.values[key]:
            raise ConfigError(f"missing config key {key!r}")
        return self.values[key]

    def get_optional(self, key: str) -> str | None:
        return self.values.get(key) or None

    def get_int(self, key: str) -> int:
        try:
            return int(self.get(key))
        except ValueError as exc:
            raise ConfigError(f"config key {key!r} must be an integer") from exc

    def get_float(self, key: str) -> float:
        try:
            return float(self.get(key))
        except ValueError as exc:
            raise ConfigError(f"config key {key!r} must be a number") from exc

    def get_path(self, key: str, must_exist: bool = True) -> Path:
        p = Path(self.get(key))
        if not p.is_absolute():
            p = self.base_dir / p
        if must_exist and not p.exists():
            raise ConfigError(f"config key {key!r}: path does not exist: {p}")
        return p

    def llm_key(self) -> str | None:
        return os.environ.get("GLOSSFORGE_LLM_KEY") or None
