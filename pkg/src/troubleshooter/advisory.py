"""Exemplar retrieval and prompt assembly for the downstream text generator."""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from importlib import resources

from .corpus import Corpus
from .errors import ConfigurationError, TransportClientError
from .inference import RankedDistribution
from .model import CbnModel

EMPTY_SOLUTIONS_SLOT = "none on record"

_OPTION_LINE = re.compile(r"^\s*-?\s*(?:Option|Solution)\s*\d*\s*[:.]\s*(?P<text>.+?)\s*$")


def _template(name: str) -> str:
    text = resources.files("troubleshooter.templates").joinpath(f"{name}.txt").read_text(
        encoding="utf-8"
    )
    return text[:-1] if text.endswith("\n") else text


@dataclass(frozen=True)
class IndexedSolution:
    record_id: str
    text: str
    distance: float


@dataclass
class SolutionIndex:
    """Per-category exemplar texts, nearest-to-centroid first."""

    buckets: dict[int, list[IndexedSolution]]

    def categories(self) -> list[int]:
        return sorted(self.buckets)


def build_index(corpus: Corpus, model: CbnModel) -> SolutionIndex:
    """Index every record's solution text under its assigned category."""
    if model.solution_quantizer is None:
        raise ConfigurationError("model has no solution quantizer")
    n_categories = model.solution_quantizer.codebook.n_categories
    buckets: dict[int, list[IndexedSolution]] = {}
    for record in corpus.records:
        cleaned = model.cleaner(record.solution, record.record_id)
        category, distance = model.solution_quantizer.assign_with_distance(cleaned)
        if not 0 <= category < n_categories:
            raise ConfigurationError(
                f"record {record.record_id}: category {category} outside the codebook"
            )
        buckets.setdefault(category, []).append(
            IndexedSolution(record_id=record.record_id, text=record.solution, distance=distance)
        )
    for bucket in buckets.values():
        bucket.sort(key=lambda item: (item.distance, item.record_id))
    return SolutionIndex(buckets=buckets)


def retrieve(index: SolutionIndex, category_id: int, k: int) -> list[str]:
    """First k exemplar texts for a category, ascending centroid distance."""
    if category_id not in index.buckets:
        raise KeyError(
            f"category {category_id} not in index (known: {index.categories()})"
        )
    return [item.text for item in index.buckets[category_id][:k]]


@dataclass(frozen=True)
class PromptBundle:
    """The three prompt blocks with every placeholder resolved."""

    query_block: str
    instruction_block: str
    safety_block: str

    @property
    def assembled(self) -> str:
        return f"{self.instruction_block}\n\n{self.safety_block}"


def render_causes(causes: RankedDistribution) -> str:
    return ", ".join(f"{label} (p={p:.2f})" for label, p in causes.entries)


def render_solutions(solutions: list[str]) -> str:
    if not solutions:
        return EMPTY_SOLUTIONS_SLOT
    return "\n" + "\n".join(f"{i}. {text}" for i, text in enumerate(solutions, start=1))


def build_prompt(
    observation_text: str, causes: RankedDistribution, solutions: list[str]
) -> PromptBundle:
    """Instantiate the stored prompt templates for one diagnosis."""
    if not causes.entries:
        raise ConfigurationError("prompt needs at least one ranked cause")
    query = (
        _template("query")
        .replace("{O}", observation_text)
        .replace("{C}", render_causes(causes))
        .replace("{S}", render_solutions(solutions))
    )
    safety = _template("safety").replace("{Q}", query)
    return PromptBundle(
        query_block=query,
        instruction_block=_template("instruction"),
        safety_block=safety,
    )


@dataclass
class Advisory:
    """Parsed generator output plus the untouched raw text."""

    options: list[str]
    raw_generation: str
    provenance: str


def parse_options(text: str) -> list[str]:
    options = []
    for line in text.splitlines():
        match = _OPTION_LINE.match(line)
        if match:
            options.append(match.group("text"))
    return options


def format_options(options: list[str]) -> str:
    return "\n".join(f" - Option {i} : {text}" for i, text in enumerate(options, start=1))


class StubGenerator:
    """Deterministic offline generator: one option per retrieved exemplar."""

    provenance = "stub"

    def __init__(self, retrieved: list[str] | None = None):
        self.retrieved = retrieved or []

    def generate(self, prompt: PromptBundle, max_tokens: int = 512) -> Advisory:
        options = [text.strip().capitalize() for text in self.retrieved if text.strip()]
        raw = format_options(options)
        return Advisory(options=parse_options(raw), raw_generation=raw, provenance=self.provenance)


class RemoteGenerator:
    """Client for an external generator; the key comes from the environment
    and is never persisted or logged."""

    def __init__(self, url: str, timeout: float = 30.0, session=None):
        if session is None:
            import requests

            session = requests.Session()
        self.url = url
        self.timeout = timeout
        self._session = session

    def generate(self, prompt: PromptBundle, max_tokens: int = 512) -> Advisory:
        headers = {}
        api_key = os.environ.get("LLM_API_KEY")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        try:
            response = self._session.post(
                self.url,
                json={"prompt": prompt.assembled, "max_tokens": max_tokens},
                headers=headers,
                timeout=self.timeout,
            )
            response.raise_for_status()
            payload = response.json()
        except Exception as exc:
            raise TransportClientError(self.url, type(exc).__name__) from exc
        text = payload.get("text", "")
        return Advisory(
            options=parse_options(text),
            raw_generation=text,
            provenance=payload.get("model", self.url),
        )
