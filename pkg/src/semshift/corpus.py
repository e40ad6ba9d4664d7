"""Ingestion, text normalization and time partitioning of comment dumps."""

from __future__ import annotations

import bisect
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

from ._io import atomic_write_text

log = logging.getLogger(__name__)

URL_PREFIXES = ("http://", "https://", "www.")
MIN_TOKEN_LENGTH = 2
MAX_MALFORMED_FRACTION = 0.5

DEFAULT_SCHEMA = {"id": "id", "body": "body", "timestamp": "created_utc"}


class IngestError(RuntimeError):
    """Raised when a record file cannot be ingested at all."""


class PeriodConfigError(ValueError):
    """Raised for invalid or overlapping period definitions."""


@dataclass(frozen=True)
class CommentRecord:
    id: str
    body: str
    created_at: float


@dataclass(frozen=True)
class TimePeriod:
    """Half-open interval ``[start, end)`` in epoch seconds (UTC)."""

    label: str
    start: float
    end: float

    def __post_init__(self):
        if not self.start < self.end:
            raise PeriodConfigError(f"period {self.label!r}: start must precede end")

    def __contains__(self, timestamp: float) -> bool:
        return self.start <= timestamp < self.end

    @classmethod
    def from_years(cls, label: str, first: int, last: int) -> "TimePeriod":
        """Period covering calendar years ``first`` through ``last`` inclusive."""
        return cls(label, _epoch(first), _epoch(last + 1))


def _epoch(year: int) -> float:
    return datetime(year, 1, 1, tzinfo=timezone.utc).timestamp()


PAPER_PERIODS = (
    TimePeriod.from_years("T1", 2012, 2014),
    TimePeriod.from_years("T2", 2015, 2019),
    TimePeriod.from_years("T3", 2020, 2022),
)


@dataclass
class TokenStream:
    period: str
    documents: list[list[str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.documents)

    def n_tokens(self) -> int:
        return sum(len(doc) for doc in self.documents)

    def tokens(self) -> Iterable[str]:
        for doc in self.documents:
            yield from doc


class Ingested(NamedTuple):
    records: list[CommentRecord]
    skipped: int


def ingest(source: str | Path, schema: Mapping[str, str] | None = None) -> Ingested:
    """Read a line-delimited JSON dump into records, in file order.

    ``schema`` maps the logical names ``id``, ``body`` and ``timestamp`` to the
    field names used in the file. Lines that fail to parse, or lack one of the
    three fields, or carry an empty body, are skipped and counted. More than
    half of the lines being malformed is treated as a wrong-format input.
    """
    fields = dict(DEFAULT_SCHEMA)
    if schema:
        fields.update(schema)
    try:
        with open(source, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestError(f"cannot read {source}: {exc}") from exc

    records = []
    skipped = 0
    n_lines = 0
    for line in lines:
        if not line.strip():
            continue
        n_lines += 1
        record = _parse_line(line, fields)
        if record is None:
            skipped += 1
        else:
            records.append(record)

    if n_lines and skipped / n_lines > MAX_MALFORMED_FRACTION:
        raise IngestError(
            f"{source}: {skipped} of {n_lines} lines malformed; "
            f"expected fields {fields['id']!r}, {fields['body']!r}, {fields['timestamp']!r}"
        )
    if skipped:
        log.info("%s: skipped %d malformed lines", source, skipped)
    return Ingested(records, skipped)


def _parse_line(line: str, fields: Mapping[str, str]) -> CommentRecord | None:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        return None
    if not isinstance(obj, dict):
        return None
    rid, body, ts = (obj.get(fields[k]) for k in ("id", "body", "timestamp"))
    if rid is None or not isinstance(body, str) or not body.strip():
        return None
    try:
        created = float(ts)
    except (TypeError, ValueError):
        return None
    return CommentRecord(str(rid), body, created)


def strip_urls(text: str) -> str:
    """Remove every maximal non-whitespace run that starts with a URL prefix."""
    lowered = text.lower()
    out = []
    i = 0
    n = len(text)
    while i < n:
        if lowered.startswith(URL_PREFIXES, i):
            while i < n and not text[i].isspace():
                i += 1
            out.append(" ")
        else:
            out.append(text[i])
            i += 1
    return "".join(out)


def tokenize(text: str) -> list[str]:
    """Split on anything that is neither alphanumeric nor an underscore.

    Leading and trailing underscores are trimmed, tokens shorter than two
    characters are dropped.
    """
    tokens = []
    current: list[str] = []
    for ch in text:
        if ch.isalnum() or ch == "_":
            current.append(ch)
        elif current:
            tokens.append("".join(current))
            current = []
    if current:
        tokens.append("".join(current))
    trimmed = (tok.strip("_") for tok in tokens)
    return [tok for tok in trimmed if len(tok) >= MIN_TOKEN_LENGTH]


def preprocess(
    record: CommentRecord | str,
    stopwords: frozenset[str] | set[str] = frozenset(),
    lemma_table: Mapping[str, str] | None = None,
) -> list[str]:
    text = record.body if isinstance(record, CommentRecord) else record
    tokens = tokenize(strip_urls(text).lower())
    if lemma_table:
        tokens = [lemma_table.get(tok, tok) for tok in tokens]
    return [tok for tok in tokens if tok not in stopwords]


def validate_periods(periods: Sequence[TimePeriod]) -> None:
    labels = [p.label for p in periods]
    if len(set(labels)) != len(labels):
        raise PeriodConfigError(f"duplicate period labels in {labels}")
    for prev, nxt in zip(periods, periods[1:]):
        if prev.start >= nxt.start:
            raise PeriodConfigError(f"periods not sorted: {prev.label} before {nxt.label}")
        if prev.end > nxt.start:
            raise PeriodConfigError(f"periods {prev.label} and {nxt.label} overlap")


def assign_period(timestamp: float, periods: Sequence[TimePeriod]) -> str | None:
    starts = [p.start for p in periods]
    idx = bisect.bisect_right(starts, timestamp) - 1
    if idx >= 0 and timestamp in periods[idx]:
        return periods[idx].label
    return None


def partition(
    records: Iterable[CommentRecord],
    periods: Sequence[TimePeriod],
    stopwords: frozenset[str] | set[str] = frozenset(),
    lemma_table: Mapping[str, str] | None = None,
) -> tuple[dict[str, TokenStream], int]:
    """Preprocess records into one token stream per period.

    Returns the streams (keyed by period label, in period order) and the
    number of records falling outside every period. Documents that become
    empty after preprocessing are kept so per-period counts add up.
    """
    validate_periods(periods)
    streams = {p.label: TokenStream(p.label) for p in periods}
    dropped = 0
    for record in records:
        label = assign_period(record.created_at, periods)
        if label is None:
            dropped += 1
            continue
        streams[label].documents.append(preprocess(record, stopwords, lemma_table))
    return streams, dropped


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Plain text, one term per line. ``None`` loads the bundled English list."""
    text = _read_resource("stopwords_en.txt") if path is None else Path(path).read_text("utf-8")
    return frozenset(line.strip().lower() for line in text.splitlines() if line.strip())


def load_lemma_table(path: str | Path | None = None) -> dict[str, str]:
    """Two-column TSV ``surface<TAB>lemma``; ``None`` loads the bundled table.

    Chains (``a -> b``, ``b -> c``) are resolved so that lemmatization is
    idempotent, and lemmas that would not survive tokenization are dropped.
    """
    text = _read_resource("lemmas_en.tsv") if path is None else Path(path).read_text("utf-8")
    raw = {}
    for line in text.splitlines():
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 2:
            continue
        surface, lemma = parts[0].strip().lower(), parts[1].strip().lower()
        if surface and tokenize(lemma) == [lemma]:
            raw[surface] = lemma
    table = {}
    for surface in raw:
        seen = {surface}
        lemma = raw[surface]
        while lemma in raw and lemma not in seen:
            seen.add(lemma)
            lemma = raw[lemma]
        table[surface] = lemma
    return table


def _read_resource(name: str) -> str:
    return resources.files("semshift.data").joinpath(name).read_text("utf-8")


def stream_path(directory: str | Path, period: str) -> Path:
    return Path(directory) / f"{period}.tokens.txt"


def write_token_stream(stream: TokenStream, directory: str | Path) -> Path:
    path = stream_path(directory, stream.period)
    atomic_write_text(path, "".join(" ".join(doc) + "\n" for doc in stream.documents))
    return path


def read_token_stream(path: str | Path, period: str | None = None) -> TokenStream:
    path = Path(path)
    if period is None:
        period = path.name.split(".tokens.txt")[0]
    with open(path, encoding="utf-8") as fh:
        docs = [line.split() for line in fh.read().splitlines()]
    return TokenStream(period, docs)
