"""Paper-metadata ingestion, normalization, deduplication, and the keyword library.

Records arrive as JSONL (canonical field names) or CSV (header aliases are
mapped).  Keywords and abstracts go through one shared normalization
pipeline: lowercase, punctuation stripped, whitespace collapsed, and a
rewrite table that expands abbreviations and folds concatenated compounds
onto their space-separated canonical form.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from datetime import date
from importlib import resources
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping


class CorpusError(Exception):
    """Fatal ingestion problem (unreadable stream, bad store file)."""


def _basic_clean(text: str) -> str:
    """Lowercase, map every non-alphanumeric character to a space, collapse runs."""
    lowered = text.lower()
    cleaned = "".join(ch if ch.isalnum() else " " for ch in lowered)
    return " ".join(cleaned.split())


def parse_abbreviations(text: str) -> dict[str, str]:
    """Parse a rewrite table from ``short=expansion`` lines ('#' for comments).

    Keys and expansions are cleaned through the same character pipeline as
    keywords, and expansions are resolved against the table itself so that a
    single rewrite pass is idempotent.
    """
    table: dict[str, str] = {}
    for lineno, raw_line in enumerate(text.splitlines(), 1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"abbreviation table line {lineno}: expected short=expansion")
        short, _, expansion = line.partition("=")
        key = _basic_clean(short)
        value = _basic_clean(expansion)
        if not key or not value:
            raise ValueError(f"abbreviation table line {lineno}: empty side")
        table[key] = value
    return _resolve_table(table)


def _resolve_table(table: dict[str, str]) -> dict[str, str]:
    resolved = dict(table)
    for _ in range(len(table) + 1):
        changed = False
        for key, value in resolved.items():
            new_value = _apply_rewrites(value, resolved)
            if new_value != value:
                resolved[key] = new_value
                changed = True
        if not changed:
            return resolved
    raise ValueError("abbreviation table does not reach a fixed point (cycle?)")


def _apply_rewrites(phrase: str, table: Mapping[str, str]) -> str:
    if not table:
        return phrase
    if phrase in table:
        return table[phrase]
    tokens = phrase.split()
    out: list[str] = []
    for token in tokens:
        out.append(table.get(token, token))
    return " ".join(out)


def load_abbreviations(path: str | Path) -> dict[str, str]:
    """Load a rewrite table from a UTF-8 file."""
    return parse_abbreviations(Path(path).read_text(encoding="utf-8"))


def default_abbreviations() -> dict[str, str]:
    """Rewrite table shipped with the package."""
    text = resources.files("litmine.data").joinpath("abbreviations.txt").read_text("utf-8")
    return parse_abbreviations(text)


_DEFAULT_TABLE: dict[str, str] | None = None


def _table(abbreviations: Mapping[str, str] | None) -> Mapping[str, str]:
    global _DEFAULT_TABLE
    if abbreviations is not None:
        return abbreviations
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = default_abbreviations()
    return _DEFAULT_TABLE


def normalize_keyword(raw: str, abbreviations: Mapping[str, str] | None = None) -> str:
    """Canonical form of a keyword: cleaned, rewritten, space-separated.

    Returns '' when nothing survives cleaning; callers drop such keywords.
    """
    cleaned = _basic_clean(raw)
    if not cleaned:
        return ""
    return _apply_rewrites(cleaned, _table(abbreviations))


def preprocess_abstract(text: str, abbreviations: Mapping[str, str] | None = None) -> str:
    """Apply the keyword normalization pipeline to a whole abstract."""
    cleaned = normalize_keyword(text, abbreviations)
    if not cleaned:
        raise ValueError("empty abstract")
    return cleaned


@dataclass
class PaperRecord:
    """One literature item: source metadata plus derived keyword/cluster tags."""

    identifier: str
    title: str
    abstract: str = ""
    doi: str | None = None
    author_keywords: list[str] = field(default_factory=list)
    cover_date: date | None = None
    subtype_description: str = ""
    aggregation_type: str = ""
    publication_name: str = ""
    citedby_count: int = 0
    author_names: list[str] = field(default_factory=list)
    url: str | None = None
    derived_keywords: list[str] = field(default_factory=list)
    cluster_ids: set[int] = field(default_factory=set)

    @property
    def final_keywords(self) -> list[str]:
        """Keywords used for clustering: author-provided when present, else derived."""
        return self.author_keywords if self.author_keywords else self.derived_keywords

    @property
    def year(self) -> int | None:
        return self.cover_date.year if self.cover_date else None


@dataclass
class IngestReport:
    added: int = 0
    duplicates_dropped: int = 0
    malformed: int = 0
    malformed_reasons: list[tuple[int, str]] = field(default_factory=list)

    def note_malformed(self, index: int, reason: str) -> None:
        self.malformed += 1
        self.malformed_reasons.append((index, reason))


@dataclass
class KeywordLibrary:
    """Normalized global keyword set with per-keyword paper counts."""

    entries: dict[str, int] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.entries)

    def __contains__(self, keyword: str) -> bool:
        return keyword in self.entries

    def keywords(self) -> list[str]:
        return sorted(self.entries)

    def to_json(self) -> str:
        return json.dumps({"entries": self.entries}, sort_keys=True, indent=0)

    @classmethod
    def from_json(cls, text: str) -> "KeywordLibrary":
        data = json.loads(text)
        return cls(entries={str(k): int(v) for k, v in data["entries"].items()})


def build_keyword_library(papers: Iterable[PaperRecord]) -> KeywordLibrary:
    """Union of normalized author keywords; counts = papers containing each."""
    entries: dict[str, int] = {}
    for paper in papers:
        for kw in set(paper.author_keywords):
            entries[kw] = entries.get(kw, 0) + 1
    return KeywordLibrary(entries=entries)


def dedupe_key(record: PaperRecord, abbreviations: Mapping[str, str] | None = None) -> str:
    """Stable identity for duplicate detection: doi, else identifier, else title."""
    if record.doi:
        return "doi:" + record.doi.strip().lower()
    if record.identifier:
        return "id:" + record.identifier
    return "title:" + normalize_keyword(record.title, abbreviations)


# Aliases seen in source exports, mapped onto the canonical JSONL field names.
FIELD_ALIASES = {
    "authKeywords": "authkeywords",
    "authorNames": "author_names",
    "abstract": "description",
    "keywords": "authkeywords",
    "cited_by_count": "citedby_count",
    "citedByCount": "citedby_count",
    "cover_date": "coverDate",
    "subtype_description": "subtypeDescription",
    "aggregation_type": "aggregationType",
    "publication_name": "publicationName",
    "link": "url",
}

KEYWORD_SEPARATOR = "|"


def _canonical_fields(raw: Mapping[str, object]) -> dict[str, object]:
    out: dict[str, object] = {}
    for key, value in raw.items():
        out[FIELD_ALIASES.get(key, key)] = value
    return out


def _split_keywords(value: object, abbreviations: Mapping[str, str] | None) -> list[str]:
    if value is None:
        return []
    if isinstance(value, str):
        parts = value.split(KEYWORD_SEPARATOR)
    elif isinstance(value, (list, tuple)):
        parts = [str(v) for v in value]
    else:
        raise ValueError("authkeywords must be a string or list")
    seen: list[str] = []
    for part in parts:
        normalized = normalize_keyword(part, abbreviations)
        if normalized and normalized not in seen:
            seen.append(normalized)
    return seen


def _split_names(value: object) -> list[str]:
    if value is None:
        return []
    if isinstance(value, str):
        return [part.strip() for part in value.split(";") if part.strip()]
    if isinstance(value, (list, tuple)):
        return [str(v).strip() for v in value if str(v).strip()]
    raise ValueError("author_names must be a string or list")


def record_from_raw(
    raw: Mapping[str, object],
    abbreviations: Mapping[str, str] | None = None,
) -> PaperRecord:
    """Build a validated PaperRecord from one raw source mapping.

    Raises ValueError with a short reason for schema violations.
    """
    data = _canonical_fields(raw)

    title = str(data.get("title") or "").strip()
    if not title:
        raise ValueError("missing title")

    identifier = str(data.get("identifier") or "").strip()
    doi = str(data.get("doi") or "").strip() or None
    if not identifier and not doi:
        raise ValueError("missing identifier and doi")
    if not identifier:
        identifier = "doi:" + doi.lower()

    raw_date = str(data.get("coverDate") or "").strip()
    if not raw_date:
        raise ValueError("missing cover_date")
    try:
        cover_date = date.fromisoformat(raw_date)
    except ValueError as exc:
        raise ValueError(f"invalid cover_date: {raw_date!r}") from exc

    citedby_raw = data.get("citedby_count", 0)
    try:
        citedby = int(citedby_raw or 0)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"invalid citedby_count: {citedby_raw!r}") from exc
    if citedby < 0:
        raise ValueError(f"invalid citedby_count: {citedby}")

    return PaperRecord(
        identifier=identifier,
        title=title,
        abstract=str(data.get("description") or "").strip(),
        doi=doi,
        author_keywords=_split_keywords(data.get("authkeywords"), abbreviations),
        cover_date=cover_date,
        subtype_description=str(data.get("subtypeDescription") or "").strip(),
        aggregation_type=str(data.get("aggregationType") or "").strip(),
        publication_name=str(data.get("publicationName") or "").strip(),
        citedby_count=citedby,
        author_names=_split_names(data.get("author_names")),
        url=str(data.get("url") or "").strip() or None,
        derived_keywords=[str(k) for k in data.get("derived_keywords", [])],
        cluster_ids={int(c) for c in data.get("cluster_ids", [])},
    )


def record_to_raw(record: PaperRecord) -> dict[str, object]:
    """Canonical JSONL representation of a record."""
    return {
        "identifier": record.identifier,
        "doi": record.doi,
        "title": record.title,
        "description": record.abstract,
        "authkeywords": KEYWORD_SEPARATOR.join(record.author_keywords),
        "coverDate": record.cover_date.isoformat() if record.cover_date else "",
        "subtypeDescription": record.subtype_description,
        "aggregationType": record.aggregation_type,
        "publicationName": record.publication_name,
        "citedby_count": record.citedby_count,
        "author_names": record.author_names,
        "url": record.url,
        "derived_keywords": list(record.derived_keywords),
        "cluster_ids": sorted(record.cluster_ids),
    }


class CorpusStore:
    """Deduplicated record set; single writer, any number of readers."""

    def __init__(self) -> None:
        self._records: dict[str, PaperRecord] = {}
        self._keys: set[str] = set()

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[PaperRecord]:
        return iter(self._records.values())

    def get(self, identifier: str) -> PaperRecord | None:
        return self._records.get(identifier)

    def records_by_identifier(self) -> list[PaperRecord]:
        return [self._records[key] for key in sorted(self._records)]

    def add(self, record: PaperRecord) -> bool:
        """Add a record; returns False when it duplicates an existing one."""
        key = dedupe_key(record)
        if key in self._keys or record.identifier in self._records:
            return False
        self._keys.add(key)
        self._records[record.identifier] = record
        return True

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for record in self.records_by_identifier():
                fh.write(json.dumps(record_to_raw(record), sort_keys=True))
                fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "CorpusStore":
        store = cls()
        try:
            with open(path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, 1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        store.add(record_from_raw(json.loads(line)))
                    except (ValueError, json.JSONDecodeError) as exc:
                        raise CorpusError(f"{path}:{lineno}: {exc}") from exc
        except OSError as exc:
            raise CorpusError(f"cannot read corpus store {path}: {exc}") from exc
        return store


def _iter_jsonl(stream: IO[str]) -> Iterator[tuple[int, Mapping[str, object] | str]]:
    for index, line in enumerate(stream):
        line = line.strip()
        if not line:
            continue
        try:
            yield index, json.loads(line)
        except json.JSONDecodeError:
            yield index, "invalid json"


def _iter_csv(stream: IO[str]) -> Iterator[tuple[int, Mapping[str, object] | str]]:
    reader = csv.DictReader(stream)
    for index, row in enumerate(reader):
        yield index, {k: v for k, v in row.items() if k is not None}


def ingest_records(
    source: str | Path | IO[str],
    fmt: str,
    store: CorpusStore,
    abbreviations: Mapping[str, str] | None = None,
) -> IngestReport:
    """Ingest a JSONL or CSV stream into the store, skipping malformed rows."""
    if fmt not in ("jsonl", "csv"):
        raise ValueError(f"unknown format: {fmt}")

    owns_stream = isinstance(source, (str, Path))
    if owns_stream:
        try:
            stream: IO[str] = open(source, encoding="utf-8")
        except OSError as exc:
            raise CorpusError(f"cannot read {source}: {exc}") from exc
    else:
        stream = source

    report = IngestReport()
    try:
        rows = _iter_jsonl(stream) if fmt == "jsonl" else _iter_csv(stream)
        for index, row in rows:
            if isinstance(row, str):
                report.note_malformed(index, row)
                continue
            try:
                record = record_from_raw(row, abbreviations)
            except ValueError as exc:
                report.note_malformed(index, str(exc))
                continue
            if store.add(record):
                report.added += 1
            else:
                report.duplicates_dropped += 1
    except OSError as exc:
        raise CorpusError(f"stream failed during ingestion: {exc}") from exc
    finally:
        if owns_stream:
            stream.close()
    return report


def ingest_text(
    text: str,
    fmt: str,
    store: CorpusStore,
    abbreviations: Mapping[str, str] | None = None,
) -> IngestReport:
    return ingest_records(io.StringIO(text), fmt, store, abbreviations)
