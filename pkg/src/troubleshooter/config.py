"""Service configuration: plain key=value files, overridden by flags."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigurationError


@dataclass
class ServiceConfig:
    model_path: str = "model.json"
    corpus_path: str | None = None
    host: str = "127.0.0.1"
    port: int = 8080
    top_k: int = 5
    k_retrieve: int = 6
    request_timeout: float = 30.0
    max_concurrent_generations: int = 2
    llm_url: str | None = None
    embedder_url: str | None = None

    def __post_init__(self):
        if not 1 <= self.port <= 65535:
            raise ConfigurationError(f"port must be in [1, 65535], got {self.port}")
        if self.request_timeout <= 0:
            raise ConfigurationError("request_timeout must be > 0")
        if self.top_k < 1 or self.k_retrieve < 0:
            raise ConfigurationError("top_k must be >= 1 and k_retrieve >= 0")


_KEY_MAP = {
    "model_path": ("model_path", str),
    "corpus_path": ("corpus_path", str),
    "host": ("host", str),
    "port": ("port", int),
    "top_k": ("top_k", int),
    "k_retrieve": ("k_retrieve", int),
    "request_timeout": ("request_timeout", float),
    "max_concurrent_generations": ("max_concurrent_generations", int),
    "llm.url": ("llm_url", str),
    "embedder.url": ("embedder_url", str),
}


def parse_config_text(text: str) -> dict:
    """Lines of `key = value`; blank lines and # comments ignored."""
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"config line {line_no}: expected key = value")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _KEY_MAP:
            raise ConfigurationError(f"config line {line_no}: unknown key {key!r}")
        attr, cast = _KEY_MAP[key]
        try:
            values[attr] = cast(raw.strip())
        except ValueError as exc:
            raise ConfigurationError(f"config line {line_no}: bad value for {key}: {exc}") from exc
    return values


def load_config(path: str | Path | None = None, **overrides) -> ServiceConfig:
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ServiceConfig(**values)
