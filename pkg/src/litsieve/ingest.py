"""Per-database export ingestion: BibTeX and CSV into Records, plus completeness audits."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import bibtex
from .errors import ProfileError
from .merge import normalize_author, normalize_title
from .model import AuthorName, CompletionFlag, Dataset, Record, Vehicle

# entry type -> publication vehicle; anything else is misc plus a warning
ENTRY_TYPE_VEHICLES = {
    "article": Vehicle.JOURNAL,
    "inproceedings": Vehicle.CONFERENCE,
    "conference": Vehicle.CONFERENCE,
    "incollection": Vehicle.CHAPTER,
    "inbook": Vehicle.CHAPTER,
    "book": Vehicle.BOOK,
    "phdthesis": Vehicle.THESIS,
    "mastersthesis": Vehicle.THESIS,
    "misc": Vehicle.MISC,
}

# Record fields a profile may route a source column to
_MAPPABLE_FIELDS = {
    "title", "abstract", "keywords", "authors", "year", "venue",
    "publisher_db", "db_no", "vehicle", "comments", "full_text",
}

_TRUTHY = {"1", "true", "yes", "y", "x"}


def _split_keywords(raw: str) -> tuple[str, ...]:
    parts = [p.strip() for chunk in raw.split(";") for p in chunk.split(",")]
    return tuple(p for p in parts if p)


def _parse_authors(raw: str, separator: str, warnings: list[str], where: str) -> tuple[AuthorName, ...]:
    if separator in raw:
        parts = [p.strip() for p in raw.split(separator)]
    else:
        parts = [p.strip() for p in raw.split(" and ")]
    names: list[AuthorName] = []
    for part in parts:
        if not part:
            continue
        name = _strip_outer_quotes(part)
        author = normalize_author(name)
        if not author.given and author.family == name and not any(c.isalpha() for c in name):
            warnings.append(f"{where}: unparseable author {name!r} kept verbatim")
        names.append(author)
    return tuple(names)


def _strip_outer_quotes(text: str) -> str:
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        return text[1:-1]
    return text


def _completion_flags(record: Record) -> frozenset[CompletionFlag]:
    flags = set()
    if not record.abstract.strip():
        flags.add(CompletionFlag.MISSING_ABSTRACT)
    if not record.keywords:
        flags.add(CompletionFlag.MISSING_KEYWORDS)
    if record.year is None:
        flags.add(CompletionFlag.MISSING_YEAR)
    if not record.venue.strip():
        flags.add(CompletionFlag.MISSING_VENUE)
    return frozenset(flags)


def _parse_year(raw: str, warnings: list[str], where: str) -> Optional[int]:
    text = raw.strip()
    if not text:
        return None
    digits = text[:4]
    if len(text) >= 4 and digits.isdigit():
        return int(digits)
    warnings.append(f"{where}: unparseable year {raw!r}; left for completion")
    return None


def parse_bibtex(text: str) -> tuple[list[Record], list[str]]:
    """Turn a .bib export into Records plus warnings.

    Loss-accounted: every input entry becomes either a Record or a
    rejected-entry warning. Record ids are left empty; stamp_ids assigns them
    when the records enter a project.
    """
    entries, warnings = bibtex.read_entries(text)
    records: list[Record] = []
    seen_keys: set[str] = set()
    for entry in entries:
        where = f"@{entry.entry_type}{{{entry.key}}} (line {entry.line})"
        if entry.key in seen_keys:
            warnings.append(f"{where}: duplicate citation key")
        seen_keys.add(entry.key)

        vehicle = ENTRY_TYPE_VEHICLES.get(entry.entry_type)
        if vehicle is None:
            warnings.append(f"{where}: unknown entry type; treated as misc")
            vehicle = Vehicle.MISC

        fields = {k: bibtex.decode_value(v, warnings) for k, v in entry.fields.items()}
        title = fields.pop("title", "")
        if not title.strip():
            warnings.append(f"{where}: rejected, entry has no title")
            continue
        authors = _parse_authors(fields.pop("author", ""), " and ", warnings, where)
        keywords = _split_keywords(fields.pop("keywords", ""))
        abstract = fields.pop("abstract", "")
        year = _parse_year(fields.pop("year", ""), warnings, where)
        journal = fields.pop("journal", "")
        booktitle = fields.pop("booktitle", "")
        venue = journal or booktitle
        if journal and booktitle:  # keep whichever one the venue did not use
            fields["booktitle"] = booktitle
        comments = "; ".join(f"{k}={v}" for k, v in fields.items() if v)
        record = Record(
            id="",
            db_no=entry.key,
            title=title,
            authors=authors,
            keywords=keywords,
            abstract=abstract,
            year=year,
            venue=venue,
            vehicle=vehicle,
            comments=comments,
        )
        records.append(record.with_fields(completion_flags=_completion_flags(record)))
    return records, warnings


@dataclass(frozen=True)
class CsvDialect:
    delimiter: str = ","
    quotechar: str = '"'
    header: bool = True


@dataclass(frozen=True)
class SourceProfile:
    """How one database's export columns route into Record fields."""

    database_name: str
    format: str = "csv"  # csv | bibtex
    column_map: dict[str, str] = field(default_factory=dict)
    csv_dialect: CsvDialect = field(default_factory=CsvDialect)
    author_separator: str = ";"

    def __post_init__(self) -> None:
        if self.format not in ("csv", "bibtex"):
            raise ProfileError(f"unknown profile format {self.format!r}")
        bad_targets = sorted(set(self.column_map.values()) - _MAPPABLE_FIELDS)
        if bad_targets:
            raise ProfileError(f"column_map routes to unknown Record fields: {bad_targets}")
        if self.format == "csv" and "title" not in self.column_map.values():
            raise ProfileError("column_map must cover at least the title field")

    @classmethod
    def from_json(cls, text: str) -> "SourceProfile":
        data = json.loads(text)
        dialect = CsvDialect(**data.get("csv_dialect", {}))
        return cls(
            database_name=data["database_name"],
            format=data.get("format", "csv"),
            column_map=dict(data.get("column_map", {})),
            csv_dialect=dialect,
            author_separator=data.get("author_separator", ";"),
        )


def parse_csv(text: str, profile: SourceProfile) -> tuple[list[Record], list[str]]:
    """One Record per data row, fields routed via the profile's column map.

    Rows without a title become warnings, not Records. Unmapped columns are
    preserved in the record's comments so no export content is dropped.
    """
    if profile.format != "csv":
        raise ProfileError("parse_csv needs a csv-format profile")
    dialect = profile.csv_dialect
    reader = csv.reader(
        io.StringIO(text.lstrip("﻿")),
        delimiter=dialect.delimiter,
        quotechar=dialect.quotechar,
    )
    # blank lines are skipped; rows of empty cells still count as (rejected) rows
    rows = [row for row in reader if row]
    if not rows:
        return [], []
    if dialect.header:
        header = [cell.strip() for cell in rows[0]]
        data_rows = rows[1:]
    else:
        width = max(len(row) for row in rows)
        header = [str(i) for i in range(width)]
        data_rows = rows
    positions = {name: i for i, name in enumerate(header)}
    missing = sorted(col for col in profile.column_map if col not in positions)
    if missing:
        raise ProfileError(f"profile references columns absent from the header: {missing}")

    mapped_positions = {positions[col] for col in profile.column_map}
    records: list[Record] = []
    warnings: list[str] = []
    for row_no, row in enumerate(data_rows, start=2 if dialect.header else 1):
        where = f"row {row_no}"
        cells = {col: (row[idx] if idx < len(row) else "") for col, idx in positions.items()}
        routed: dict[str, str] = {}
        for col, target in profile.column_map.items():
            routed[target] = cells.get(col, "")
        title = routed.get("title", "").strip()
        if not title:
            warnings.append(f"{where}: rejected, empty title")
            continue
        year = _parse_year(routed.get("year", ""), warnings, where)
        vehicle = _parse_vehicle(routed.get("vehicle", ""), warnings, where)
        extras = "; ".join(
            f"{header[i]}={row[i].strip()}"
            for i in range(len(header))
            if i not in mapped_positions and i < len(row) and row[i].strip()
        )
        comments = routed.get("comments", "").strip()
        if extras:
            comments = f"{comments}; {extras}" if comments else extras
        record = Record(
            id="",
            db_no=routed.get("db_no", "").strip() or str(row_no),
            title=title,
            authors=_parse_authors(routed.get("authors", ""), profile.author_separator, warnings, where),
            keywords=_split_keywords(routed.get("keywords", "")),
            abstract=routed.get("abstract", "").strip(),
            year=year,
            publisher_db=routed.get("publisher_db", "").strip() or profile.database_name,
            venue=routed.get("venue", "").strip(),
            vehicle=vehicle,
            full_text_available=routed.get("full_text", "").strip().lower() in _TRUTHY,
            comments=comments,
        )
        records.append(record.with_fields(completion_flags=_completion_flags(record)))
    return records, warnings


def _parse_vehicle(raw: str, warnings: list[str], where: str) -> Vehicle:
    text = raw.strip().lower()
    if not text:
        return Vehicle.MISC
    try:
        return Vehicle(text)
    except ValueError:
        warnings.append(f"{where}: unknown publication vehicle {raw!r}; treated as misc")
        return Vehicle.MISC


def stamp_ids(records: Sequence[Record], database: str, start: int = 1) -> list[Record]:
    """Assign project-wide ids ({database}-{seq}) and the database provenance."""
    return [
        r.with_fields(id=f"{database}-{start + i:04d}", publisher_db=r.publisher_db or database)
        for i, r in enumerate(records)
    ]


@dataclass(frozen=True)
class CompletionAudit:
    """Which records still await step-wise completion, per flag."""

    counts: dict[CompletionFlag, int]
    ids: dict[CompletionFlag, tuple[str, ...]]

    def __post_init__(self) -> None:
        mismatched = [f for f in self.counts if self.counts[f] != len(self.ids.get(f, ()))]
        if mismatched:
            raise ValueError(f"audit counts disagree with id lists for {mismatched}")


def audit_completion(d: Dataset) -> CompletionAudit:
    ids: dict[CompletionFlag, list[str]] = {flag: [] for flag in CompletionFlag}
    for record in d.records:
        for flag in record.completion_flags:
            ids[flag].append(record.id)
    ordered = {flag: tuple(sorted(ids[flag])) for flag in CompletionFlag}
    return CompletionAudit(
        counts={flag: len(ordered[flag]) for flag in CompletionFlag},
        ids=ordered,
    )


@dataclass(frozen=True)
class ReferenceDescriptor:
    title: str
    year: Optional[int] = None


@dataclass(frozen=True)
class ReferenceCheck:
    found: tuple[tuple[ReferenceDescriptor, str], ...]  # (descriptor, matching record id)
    missing: tuple[ReferenceDescriptor, ...]

    @property
    def all_found(self) -> bool:
        return not self.missing


def check_reference_set(d: Dataset, refs: Sequence[ReferenceDescriptor]) -> ReferenceCheck:
    """Verify the expected reference publications are inside the result set.

    A ref matches on normalized title, plus the year when the ref gives one.
    Missing refs are the signal to revise the search queries.
    """
    by_title: dict[str, list[Record]] = {}
    for record in d.records:
        by_title.setdefault(normalize_title(record.title), []).append(record)
    found: list[tuple[ReferenceDescriptor, str]] = []
    missing: list[ReferenceDescriptor] = []
    for ref in refs:
        candidates = by_title.get(normalize_title(ref.title), [])
        match = next(
            (r for r in candidates if ref.year is None or r.year == ref.year),
            None,
        )
        if match is None:
            missing.append(ref)
        else:
            found.append((ref, match.id))
    return ReferenceCheck(found=tuple(found), missing=tuple(missing))
