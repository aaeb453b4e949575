"""Pre-analysis helpers: term frequencies, demographics, coauthor networks.

These functions summarize a cleaned dataset before any deep reading
happens: frequency tables that feed word-cloud tools, year/venue/category
tabulations for demographic questions, and a collaboration graph exported
in neutral formats for network tools. Everything here is advisory; nothing
in this module ever removes a record.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

from .errors import DataIntegrityError
from .model import Dataset

MIN_TOKEN_LENGTH = 3

# Compact English function-word list; callers extend it per study.
DEFAULT_STOPWORDS = frozenset(
    """
    the and for are with that this from was were will not but their its they
    these those such than then there also our you your his her may might
    should could would does did been being into about between during each
    more most other some any all nor only own same too very what when where
    who whom why how because while over under again further once here both
    few can has have
    """.split()
)

_TOKEN_SPLIT = re.compile(r"[^a-z0-9]+")


class TermScope(str, Enum):
    KEYWORDS = "keywords"
    ABSTRACTS = "abstracts"


@dataclass(frozen=True)
class CodingMap:
    """Case-insensitive surface-form to code mapping, applied in one pass.

    A code may never itself appear as a surface form; that would invite
    chained rewrites and make the result depend on application order.
    """

    entries: Mapping[str, str]

    def __post_init__(self) -> None:
        lowered = {k.strip().lower(): v.strip().lower() for k, v in self.entries.items()}
        for code in lowered.values():
            if code in lowered:
                raise DataIntegrityError(
                    "coding map chains a code into another surface form",
                    details={"code": code},
                )
        object.__setattr__(self, "entries", lowered)

    def apply(self, term: str) -> str:
        return self.entries.get(term.lower(), term)

    def codes(self) -> frozenset[str]:
        return frozenset(self.entries.values())

    def token_sequences(self) -> Tuple[Tuple[Tuple[str, ...], str], ...]:
        """Surface forms as token tuples, longest first, with their codes."""
        pairs = []
        for surface, code in self.entries.items():
            tokens = tuple(t for t in _TOKEN_SPLIT.split(surface) if t)
            if tokens:
                pairs.append((tokens, code))
        pairs.sort(key=lambda p: (-len(p[0]), p[0]))
        return tuple(pairs)


@dataclass(frozen=True)
class TermFrequency:
    scope: TermScope
    counts: Mapping[str, int]
    stopwords_applied: bool

    def __post_init__(self) -> None:
        for term, count in self.counts.items():
            if count < 1 or term != term.lower():
                raise DataIntegrityError(
                    "term counts must be positive and lowercase",
                    details={"term": term, "count": count},
                )


def _normalize_keyword(phrase: str) -> str:
    folded = " ".join(phrase.lower().split())
    return folded.strip(" \t.,;:!?\"'()[]{}")


def _code_tokens(tokens: list[str], coding: CodingMap) -> list[Tuple[str, bool]]:
    """Replace surface-form token runs with their code, marking coded tokens."""
    sequences = coding.token_sequences()
    out: list[Tuple[str, bool]] = []
    i = 0
    while i < len(tokens):
        matched = False
        for surface, code in sequences:
            if tuple(tokens[i : i + len(surface)]) == surface:
                out.append((code, True))
                i += len(surface)
                matched = True
                break
        if not matched:
            out.append((tokens[i], False))
            i += 1
    return out


def _abstract_terms(
    text: str, coding: Optional[CodingMap], stopwords: frozenset[str]
) -> Iterable[str]:
    tokens = [t for t in _TOKEN_SPLIT.split(text.lower()) if t]
    coded = _code_tokens(tokens, coding) if coding else [(t, False) for t in tokens]
    for token, is_code in coded:
        if not is_code and len(token) < MIN_TOKEN_LENGTH:
            continue
        if token in stopwords:
            continue
        yield token


def _keyword_terms(
    keywords: Sequence[str], coding: Optional[CodingMap], stopwords: frozenset[str]
) -> Iterable[str]:
    for phrase in keywords:
        term = _normalize_keyword(phrase)
        if not term:
            continue
        if coding:
            term = coding.apply(term)
        if term in stopwords:
            continue
        yield term


def term_frequency(
    d: Dataset,
    scope: TermScope,
    coding: Optional[CodingMap] = None,
    stopwords: Iterable[str] = (),
) -> TermFrequency:
    """Count terms across the dataset's keywords or abstracts.

    Keywords count as whole phrases; abstracts are tokenized on
    non-alphanumerics with short tokens dropped. The coding map runs
    before the stopword filter, and coded terms skip the length floor so
    short codes survive.
    """
    scope = TermScope(scope)
    stop = frozenset(w.lower() for w in stopwords)
    counts: Dict[str, int] = {}
    for record in d.records:
        if scope is TermScope.KEYWORDS:
            terms = _keyword_terms(record.keywords, coding, stop)
        else:
            terms = _abstract_terms(record.abstract, coding, stop)
        for term in terms:
            counts[term] = counts.get(term, 0) + 1
    return TermFrequency(scope=scope, counts=counts, stopwords_applied=bool(stop))


def outlier_terms(
    tf: TermFrequency, expected: Iterable[str]
) -> Tuple[Tuple[str, int], ...]:
    """Terms outside the expected vocabulary, most frequent first.

    Purely advisory: a surprising term flags papers worth a manual look,
    it never drives an exclusion by itself.
    """
    known = {e.lower() for e in expected}
    unexpected = [(t, c) for t, c in tf.counts.items() if t not in known]
    unexpected.sort(key=lambda pair: (-pair[1], pair[0]))
    return tuple(unexpected)


@dataclass(frozen=True)
class Demographics:
    """Bucket counts; every mapping partitions the dataset."""

    by_year: Mapping[str, int]
    by_vehicle: Mapping[str, int]
    by_metadata: Mapping[str, Mapping[str, int]]


UNKNOWN_BUCKET = "unknown"


def demographics(d: Dataset) -> Demographics:
    by_year: Dict[str, int] = {}
    by_vehicle: Dict[str, int] = {}
    classes = sorted({key for r in d.records for key in r.metadata})
    by_metadata: Dict[str, Dict[str, int]] = {c: {} for c in classes}
    for record in d.records:
        year_key = str(record.year) if record.year is not None else UNKNOWN_BUCKET
        by_year[year_key] = by_year.get(year_key, 0) + 1
        vehicle_key = record.vehicle.value
        by_vehicle[vehicle_key] = by_vehicle.get(vehicle_key, 0) + 1
        for cls in classes:
            value = record.metadata.get(cls, UNKNOWN_BUCKET)
            by_metadata[cls][value] = by_metadata[cls].get(value, 0) + 1
    return Demographics(by_year=by_year, by_vehicle=by_vehicle, by_metadata=by_metadata)


@dataclass(frozen=True)
class CoauthorGraph:
    """Undirected collaboration graph keyed by canonical author names."""

    nodes: Mapping[str, int] = field(default_factory=dict)
    edges: Mapping[Tuple[str, str], int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for (a, b), weight in self.edges.items():
            if a >= b:
                raise DataIntegrityError(
                    "edge endpoints must be ordered and distinct",
                    details={"edge": (a, b)},
                )
            if a not in self.nodes or b not in self.nodes:
                raise DataIntegrityError(
                    "edge endpoint missing from node set", details={"edge": (a, b)}
                )
            if weight < 1:
                raise DataIntegrityError("edge weight must be positive")


def coauthor_graph(d: Dataset) -> CoauthorGraph:
    """Build the coauthor network: node weight = papers, edge weight = joint papers."""
    nodes: Dict[str, int] = {}
    edges: Dict[Tuple[str, str], int] = {}
    for record in d.records:
        canon = sorted({a.canonical for a in record.authors if a.canonical.strip()})
        for name in canon:
            nodes[name] = nodes.get(name, 0) + 1
        for a, b in combinations(canon, 2):
            edges[(a, b)] = edges.get((a, b), 0) + 1
    return CoauthorGraph(nodes=nodes, edges=edges)


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue()


def term_frequency_csv(tf: TermFrequency) -> str:
    rows = sorted(tf.counts.items(), key=lambda pair: (-pair[1], pair[0]))
    return _csv_text(("term", "count"), rows)


def graph_nodes_csv(g: CoauthorGraph) -> str:
    rows = sorted(g.nodes.items(), key=lambda pair: (-pair[1], pair[0]))
    return _csv_text(("author", "papers"), rows)


def graph_edges_csv(g: CoauthorGraph) -> str:
    rows = sorted(
        ((a, b, w) for (a, b), w in g.edges.items()),
        key=lambda row: (-row[2], row[0], row[1]),
    )
    return _csv_text(("source", "target", "weight"), rows)


def _gml_escape(label: str) -> str:
    return label.replace("\\", "\\\\").replace('"', '\\"')


def graph_gml(g: CoauthorGraph) -> str:
    """Serialize the graph in the plain-text GML interchange format."""
    ids = {name: i for i, name in enumerate(sorted(g.nodes))}
    lines = ["graph [", "  directed 0"]
    for name in sorted(g.nodes):
        lines += [
            "  node [",
            f"    id {ids[name]}",
            f'    label "{_gml_escape(name)}"',
            f"    papers {g.nodes[name]}",
            "  ]",
        ]
    for (a, b) in sorted(g.edges):
        lines += [
            "  edge [",
            f"    source {ids[a]}",
            f"    target {ids[b]}",
            f"    weight {g.edges[(a, b)]}",
            "  ]",
        ]
    lines.append("]")
    return "\n".join(lines) + "\n"
