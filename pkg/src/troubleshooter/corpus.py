"""Ingestion, cleaning and splitting of maintenance return-on-experience records."""

from __future__ import annotations

import csv
import io
import json
import random
import time
from dataclasses import dataclass, field

from .errors import ConfigurationError, IngestError
from .stopwords import DEFAULT_STOPWORDS

REQUIRED_FIELDS = ("environment", "subsystem", "root_cause", "observation", "solution")


@dataclass(frozen=True)
class RoxRecord:
    """One maintenance event: who saw what failure and how it was fixed."""

    record_id: str
    environment: str
    subsystem: str
    root_cause: str
    observation: str
    solution: str


@dataclass(frozen=True)
class CleanText:
    """Normalized token sequence, traceable to its source record."""

    tokens: tuple[str, ...]
    source_id: str = ""

    @property
    def joined(self) -> str:
        return " ".join(self.tokens)


@dataclass
class Corpus:
    """Immutable record collection; the single source of training and retrieval text."""

    records: list[RoxRecord]
    provenance: dict = field(default_factory=dict, compare=False)

    @property
    def environments(self) -> set[str]:
        return {r.environment for r in self.records}

    def __len__(self) -> int:
        return len(self.records)

    def by_id(self, record_id: str) -> RoxRecord:
        for r in self.records:
            if r.record_id == record_id:
                return r
        raise KeyError(f"no record with id {record_id!r}")


@dataclass
class IngestReport:
    """Tally of rows rejected during ingest."""

    total_rows: int = 0
    valid: int = 0
    skipped: int = 0
    first_skipped_rows: list[int] = field(default_factory=list)
    reasons: dict[str, int] = field(default_factory=dict)

    def note_skip(self, row: int, reason: str) -> None:
        self.skipped += 1
        if len(self.first_skipped_rows) < 10:
            self.first_skipped_rows.append(row)
        self.reasons[reason] = self.reasons.get(reason, 0) + 1

    def summary(self) -> str:
        lines = [f"rows: {self.total_rows}, valid: {self.valid}, skipped: {self.skipped}"]
        if self.skipped:
            lines.append(f"first skipped rows: {self.first_skipped_rows}")
            for reason in sorted(self.reasons):
                lines.append(f"  {reason}: {self.reasons[reason]}")
        return "\n".join(lines)


# Suffix rules applied repeatedly until the token stops changing; the
# fixpoint loop is what makes cleaning idempotent.
def _stem(token: str) -> str:
    while True:
        if token.endswith("ies") and len(token) > 4:
            token = token[:-3] + "y"
        elif token.endswith("sses"):
            token = token[:-2]
        elif (
            token.endswith("s")
            and len(token) > 3
            and not token.endswith(("ss", "us", "is"))
        ):
            token = token[:-1]
        elif token.endswith("ing") and len(token) > 5:
            token = token[:-3]
        elif token.endswith("ed") and len(token) > 4:
            token = token[:-2]
        else:
            return token


def _normalize_word(word: str) -> str:
    return "".join(ch for ch in word.lower() if ch.isalnum())


def clean_text(
    raw: str,
    stopwords: frozenset[str] = DEFAULT_STOPWORDS,
    stemming: bool = True,
    source_id: str = "",
) -> CleanText:
    """Lowercase, strip punctuation, drop stopwords and optionally stem suffixes.

    Token order is preserved; tokens reduced to the empty string are dropped.
    An empty result is valid: callers that need non-empty text enforce it.
    """
    tokens = []
    for word in raw.split():
        token = _normalize_word(word)
        if not token or token in stopwords:
            continue
        if stemming:
            token = _stem(token)
        if token and token not in stopwords:
            tokens.append(token)
    return CleanText(tokens=tuple(tokens), source_id=source_id)


@dataclass(frozen=True)
class TextCleaner:
    """Cleaning policy applied identically at train and query time."""

    stopwords: frozenset[str] = DEFAULT_STOPWORDS
    stemming: bool = True

    def __call__(self, raw: str, source_id: str = "") -> CleanText:
        return clean_text(raw, self.stopwords, self.stemming, source_id)


def _rows_from_jsonl(text: str, report: IngestReport):
    for row_num, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        report.total_rows += 1
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            report.note_skip(row_num, "malformed json")
            continue
        if not isinstance(obj, dict):
            report.note_skip(row_num, "not an object")
            continue
        yield row_num, obj


def _rows_from_csv(text: str, report: IngestReport):
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise IngestError("csv input has no header row")
    missing = [f for f in REQUIRED_FIELDS if f not in reader.fieldnames]
    if missing:
        raise IngestError(f"csv header missing columns: {', '.join(missing)}")
    for row_num, row in enumerate(reader):
        report.total_rows += 1
        yield row_num, {k: v for k, v in row.items() if k is not None}


def ingest(
    source: bytes | str,
    format: str = "jsonl",
    cleaner: TextCleaner | None = None,
    source_path: str = "",
) -> tuple[Corpus, IngestReport]:
    """Parse a JSONL or CSV byte stream into a validated Corpus.

    Invalid rows (missing fields, empty labels, text that cleans to nothing)
    are skipped and tallied in the report. Duplicate record ids, undecodable
    input and an all-invalid corpus are fatal.
    """
    if format not in ("jsonl", "csv"):
        raise ConfigurationError(f"unsupported ingest format {format!r}")
    cleaner = cleaner or TextCleaner()
    if isinstance(source, bytes):
        try:
            text = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise IngestError(f"input is not valid UTF-8: {exc}") from exc
    else:
        text = source

    report = IngestReport()
    rows = _rows_from_jsonl(text, report) if format == "jsonl" else _rows_from_csv(text, report)

    records: list[RoxRecord] = []
    seen_ids: set[str] = set()
    for row_num, obj in rows:
        missing = [f for f in REQUIRED_FIELDS if f not in obj or obj[f] is None]
        if missing:
            report.note_skip(row_num, "missing field")
            continue
        values = {f: str(obj[f]) for f in REQUIRED_FIELDS}
        if not all(values[f].strip() for f in ("environment", "subsystem", "root_cause")):
            report.note_skip(row_num, "empty label")
            continue
        if not cleaner(values["observation"]).tokens or not cleaner(values["solution"]).tokens:
            report.note_skip(row_num, "text empty after cleaning")
            continue
        raw_id = obj.get("record_id")
        record_id = str(raw_id) if raw_id is not None and str(raw_id) != "" else str(row_num)
        if record_id in seen_ids:
            raise IngestError(f"duplicate record_id {record_id!r}")
        seen_ids.add(record_id)
        records.append(RoxRecord(record_id=record_id, **values))
        report.valid += 1

    if not records:
        raise IngestError("no valid records in input")
    provenance = {"source": source_path, "ingested_at": time.time()}
    return Corpus(records=records, provenance=provenance), report


def export_jsonl(corpus: Corpus) -> str:
    """Serialize a corpus so that re-ingesting reproduces it exactly."""
    lines = []
    for r in corpus.records:
        lines.append(
            json.dumps(
                {
                    "record_id": r.record_id,
                    "environment": r.environment,
                    "subsystem": r.subsystem,
                    "root_cause": r.root_cause,
                    "observation": r.observation,
                    "solution": r.solution,
                },
                ensure_ascii=False,
                sort_keys=True,
            )
        )
    return "\n".join(lines) + "\n"


def split(corpus: Corpus, train_fraction: float, seed: int) -> tuple[Corpus, Corpus]:
    """Deterministic stratified train/test partition by root cause.

    Every stratum with at least two members contributes to both halves;
    singletons go to the training side.
    """
    if not 0 < train_fraction < 1:
        raise ConfigurationError(f"train_fraction must be in (0, 1), got {train_fraction}")
    if len(corpus.records) < 2:
        raise ConfigurationError("need at least 2 records to split")

    strata: dict[str, list[int]] = {}
    for idx, record in enumerate(corpus.records):
        strata.setdefault(record.root_cause, []).append(idx)

    rng = random.Random(seed)
    train_idx: list[int] = []
    test_idx: list[int] = []
    for cause in sorted(strata):
        members = list(strata[cause])
        rng.shuffle(members)
        if len(members) == 1:
            train_idx.extend(members)
            continue
        n_train = round(train_fraction * len(members))
        n_train = min(max(n_train, 1), len(members) - 1)
        train_idx.extend(members[:n_train])
        test_idx.extend(members[n_train:])

    train_idx.sort()
    test_idx.sort()
    prov = dict(corpus.provenance)
    train = Corpus(records=[corpus.records[i] for i in train_idx], provenance=prov)
    test = Corpus(records=[corpus.records[i] for i in test_idx], provenance=prov)
    return train, test
