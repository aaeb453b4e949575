"""Stepwise dataset integration: joining result sets, duplicate handling, author cleanup.

Integration is two-staged (per database, then across databases) and every
removal is logged so the selection funnel can be reconstructed from the logs
alone.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

from .errors import DataIntegrityError, PreconditionError
from .model import (
    AuthorName,
    Dataset,
    MergeEvent,
    MergeKind,
    MergeStage,
    Record,
    ResolutionNote,
    Vehicle,
    ensure_unique_ids,
    record_database,
)
from .util import now_iso

_NON_ALNUM_RE = re.compile(r"[^0-9a-z]+")
_INITIAL_RUN_RE = re.compile(r"^(?:[A-Za-z]\.)+$")
_ALL_CAPS_RE = re.compile(r"^[A-Z]{2,3}$")

# lowercase particles that belong to the family name in plain-form author strings
_NAME_PARTICLES = frozenset(
    {
        "van", "von", "der", "den", "de", "da", "das", "dos", "do", "del",
        "della", "di", "du", "la", "le", "ter", "ten", "op", "het", "bin",
        "ibn", "al", "el", "mac", "st",
    }
)

DEFAULT_SIMILARITY_THRESHOLD = 0.92
EXTENSION_YEAR_GAP = 3


def normalize_title(title: str) -> str:
    """Comparison form of a title: accent-folded, lowercase, punctuation-free."""
    folded = unicodedata.normalize("NFKD", title)
    folded = "".join(ch for ch in folded if not unicodedata.combining(ch))
    return _NON_ALNUM_RE.sub(" ", folded.lower()).strip()


def normalize_author(raw: str) -> AuthorName:
    """Split a raw author string into given/family, tolerating both name orders.

    "Family, Given" and "Given Family" forms yield the same canonical value;
    initials come out dotted with single spaces. Strings without letters are
    kept verbatim as the family name.
    """
    text = " ".join(raw.split())
    if not any(ch.isalpha() for ch in text):
        return AuthorName(given="", family=raw, raw=raw)
    if "," in text:
        family, _, given = text.partition(",")
        return AuthorName(given=_normalize_given(given.strip()), family=family.strip(), raw=raw)
    tokens = text.split(" ")
    if len(tokens) == 1:
        return AuthorName(given="", family=tokens[0], raw=raw)
    split = len(tokens) - 1
    while split > 1 and tokens[split - 1].lower() in _NAME_PARTICLES:
        split -= 1
    given = " ".join(tokens[:split])
    family = " ".join(tokens[split:])
    return AuthorName(given=_normalize_given(given), family=family, raw=raw)


def _normalize_given(given: str) -> str:
    out: list[str] = []
    for token in given.split(" "):
        if not token:
            continue
        if _INITIAL_RUN_RE.match(token):
            out.extend(f"{letter}." for letter in token.replace(".", ""))
        elif len(token) == 1 and token.isalpha():
            out.append(f"{token}.")
        elif _ALL_CAPS_RE.match(token):
            out.extend(f"{letter}." for letter in token)
        else:
            out.append(token)
    return " ".join(out)


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost))
        previous = current
    return previous[-1]


def similarity(a: str, b: str) -> float:
    """Normalized edit-distance ratio in [0, 1]; 1.0 for two empty strings."""
    if not a and not b:
        return 1.0
    return 1.0 - levenshtein(a, b) / max(len(a), len(b))


class DuplicateKind(str, Enum):
    EXACT = "exact"
    FUZZY = "fuzzy"
    EXTENSION_CANDIDATE = "extension_candidate"


@dataclass(frozen=True)
class DuplicatePair:
    a: str
    b: str
    kind: DuplicateKind
    score: float

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise DataIntegrityError("a duplicate pair needs two distinct records")
        if self.kind is DuplicateKind.EXACT and self.score != 1.0:
            raise DataIntegrityError("exact pairs have score 1.0 by definition")


def _block_key(normalized_title: str) -> str:
    return " ".join(normalized_title.split(" ")[:4])


def _is_extension(x: Record, y: Record) -> bool:
    """Conference/workshop paper followed by a journal version within 3 years."""
    early = (Vehicle.CONFERENCE, Vehicle.WORKSHOP)
    for conf, journal in ((x, y), (y, x)):
        if conf.vehicle in early and journal.vehicle is Vehicle.JOURNAL:
            if conf.year is None or journal.year is None:
                return True
            return conf.year <= journal.year <= conf.year + EXTENSION_YEAR_GAP
    return False


def find_duplicates(
    d: Dataset, threshold: float = DEFAULT_SIMILARITY_THRESHOLD
) -> list[DuplicatePair]:
    """Report likely duplicates; removes nothing.

    Comparison is pairwise within title-prefix blocks (first 4 normalized
    tokens) so large sets stay near-linear. Exact pairs share a normalized
    title and year; extension candidates pair a conference/workshop paper with
    its likely journal version.
    """
    if not 0.0 < threshold <= 1.0:
        raise PreconditionError(f"threshold must be in (0, 1], got {threshold}")
    indexed = list(enumerate(d.records))
    blocks: dict[str, list[tuple[int, Record, str]]] = {}
    for idx, record in indexed:
        nt = normalize_title(record.title)
        blocks.setdefault(_block_key(nt), []).append((idx, record, nt))

    pairs: list[tuple[int, int, DuplicatePair]] = []
    for members in blocks.values():
        for pos_a in range(len(members)):
            ia, ra, nta = members[pos_a]
            for pos_b in range(pos_a + 1, len(members)):
                ib, rb, ntb = members[pos_b]
                score = 1.0 if nta == ntb else similarity(nta, ntb)
                if score < threshold:
                    continue
                if _is_extension(ra, rb):
                    kind = DuplicateKind.EXTENSION_CANDIDATE
                elif nta == ntb and ra.year == rb.year:
                    kind = DuplicateKind.EXACT
                    score = 1.0
                else:
                    kind = DuplicateKind.FUZZY
                pairs.append((ia, ib, DuplicatePair(ra.id, rb.id, kind, score)))
    pairs.sort(key=lambda item: (item[0], item[1]))
    return [pair for _, _, pair in pairs]


@dataclass(frozen=True)
class ResolutionPolicy:
    """Total order of keep-rules for duplicate pairs."""

    rule_order: tuple[str, ...] = (
        "full_text",
        "journal_over_conference",
        "source_priority",
        "lower_id",
    )
    source_priority: tuple[str, ...] = ()
    auto_resolve_extensions: bool = False
    duplicate_criterion: str = "E7"

    def __post_init__(self) -> None:
        known = {"full_text", "journal_over_conference", "source_priority", "lower_id"}
        unknown = [r for r in self.rule_order if r not in known]
        if unknown:
            raise PreconditionError(f"unknown resolution rules: {unknown}")
        if "lower_id" not in self.rule_order:
            raise PreconditionError("rule_order must end in a total rule; include lower_id")


def _apply_rule(rule: str, x: Record, y: Record, policy: ResolutionPolicy) -> Optional[Record]:
    """The record to keep per this rule, or None when the rule does not discriminate."""
    if rule == "full_text":
        if x.full_text_available != y.full_text_available:
            return x if x.full_text_available else y
    elif rule == "journal_over_conference":
        early = (Vehicle.CONFERENCE, Vehicle.WORKSHOP)
        if x.vehicle is Vehicle.JOURNAL and y.vehicle in early:
            return x
        if y.vehicle is Vehicle.JOURNAL and x.vehicle in early:
            return y
    elif rule == "source_priority":
        order = {name: i for i, name in enumerate(policy.source_priority)}
        rx = order.get(record_database(x), len(order))
        ry = order.get(record_database(y), len(order))
        if rx != ry:
            return x if rx < ry else y
    elif rule == "lower_id":
        return x if x.id < y.id else y
    return None


def resolve_duplicates(
    d: Dataset,
    pairs: Sequence[DuplicatePair],
    policy: ResolutionPolicy = ResolutionPolicy(),
    stage: MergeStage = MergeStage.CROSS_DATABASE,
    dataset_name: str = "dataset",
) -> tuple[Dataset, MergeEvent]:
    """Remove one record per resolvable pair, logging which rule decided.

    Extension candidates are left alone unless the policy auto-resolves them.
    Pairs whose loser was already removed by an earlier pair are skipped, so
    duplicate triples resolve in one pass.
    """
    by_id = {r.id: r for r in d.records}
    removed: dict[str, ResolutionNote] = {}
    kept: set[str] = set()
    for pair in pairs:
        if pair.a not in by_id or pair.b not in by_id:
            missing = pair.a if pair.a not in by_id else pair.b
            raise PreconditionError(f"duplicate pair references unknown record {missing!r}")
        if pair.kind is DuplicateKind.EXTENSION_CANDIDATE and not policy.auto_resolve_extensions:
            continue
        if pair.a in removed or pair.b in removed:
            continue
        x, y = by_id[pair.a], by_id[pair.b]
        for rule in policy.rule_order:
            winner = _apply_rule(rule, x, y, policy)
            if winner is not None:
                loser = y if winner is x else x
                removed[loser.id] = ResolutionNote(kept=winner.id, removed=loser.id, rule=rule)
                kept.add(winner.id)
                break

    conflict = kept & set(removed)
    if conflict:
        raise DataIntegrityError(f"records both kept and removed: {sorted(conflict)}")

    survivors = [r for r in d.records if r.id not in removed]
    notes = tuple(removed[r.id] for r in d.records if r.id in removed)
    event = MergeEvent(
        stage=stage,
        kind=MergeKind.DEDUP,
        inputs=((dataset_name, len(d)),),
        duplicates_removed=len(notes),
        resolution_notes=notes,
        criteria_applied=(policy.duplicate_criterion,) if notes else (),
        timestamp=now_iso(),
    )
    return d.evolve(survivors, event), event


def integrate(
    parts: Sequence[tuple[str, Dataset]], stage: MergeStage
) -> tuple[Dataset, MergeEvent]:
    """Concatenate named datasets into one, keeping every part's log.

    Deliberately does not dedup; duplicate removal is its own logged step.
    """
    if not parts:
        raise PreconditionError("integrate needs at least one input dataset")
    ensure_unique_ids(parts)
    event = MergeEvent(
        stage=stage,
        kind=MergeKind.INTEGRATE,
        inputs=tuple((name, len(ds)) for name, ds in parts),
        timestamp=now_iso(),
    )
    records: list[Record] = []
    log: list[MergeEvent] = []
    for _, ds in parts:
        records.extend(ds.records)
        log.extend(ds.merge_log)
    log.append(event)
    return Dataset(records=tuple(records), merge_log=tuple(log), revision=1), event


def apply_filter(
    d: Dataset,
    label: str,
    keep: Callable[[Record], bool],
    databases: Sequence[str] = (),
    criteria: Sequence[str] = (),
    stage: MergeStage = MergeStage.CROSS_DATABASE,
) -> tuple[Dataset, MergeEvent]:
    """Drop records failing a named in-depth filter, scoped to some databases.

    An empty ``databases`` applies the filter to every record. The event's
    inputs list the databases the filter touched (with their pre-filter
    counts), which is what lets the funnel tell filtered from unfiltered.
    """
    counts: dict[str, int] = {}
    for record in d.records:
        counts[record_database(record)] = counts.get(record_database(record), 0) + 1
    touched = tuple(databases) if databases else tuple(counts)
    unknown = [db for db in touched if db not in counts]
    if unknown:
        raise PreconditionError(f"filter names databases absent from the dataset: {unknown}")

    survivors: list[Record] = []
    notes: list[ResolutionNote] = []
    for record in d.records:
        if record_database(record) in touched and not keep(record):
            notes.append(ResolutionNote(kept="", removed=record.id, rule=label))
        else:
            survivors.append(record)
    event = MergeEvent(
        stage=stage,
        kind=MergeKind.FILTER,
        inputs=tuple((db, counts[db]) for db in touched),
        duplicates_removed=len(notes),
        resolution_notes=tuple(notes),
        criteria_applied=tuple(criteria),
        label=label,
        timestamp=now_iso(),
    )
    return d.evolve(survivors, event), event


def import_event(database: str, query_label: str, size: int) -> MergeEvent:
    """Log entry for one raw export file entering the project."""
    return MergeEvent(
        stage=MergeStage.PER_DATABASE,
        kind=MergeKind.IMPORT,
        inputs=((database, size),),
        label=query_label,
        timestamp=now_iso(),
    )
