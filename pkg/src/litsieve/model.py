"""Shared domain types: records, datasets, criteria, and project configuration.

Everything here is an immutable snapshot: mutating operations return a new
value (datasets additionally bump their revision), so instances can be handed
between threads freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from .errors import DataIntegrityError, PreconditionError


class Vehicle(str, Enum):
    """Publication vehicle; a closed set with ``misc`` as catch-all."""

    JOURNAL = "journal"
    MAGAZINE = "magazine"
    CONFERENCE = "conference"
    WORKSHOP = "workshop"
    BOOK = "book"
    CHAPTER = "chapter"
    THESIS = "thesis"
    MISC = "misc"


class CompletionFlag(str, Enum):
    """Markers for fields still awaiting step-wise completion."""

    MISSING_ABSTRACT = "missing_abstract"
    MISSING_KEYWORDS = "missing_keywords"
    MISSING_YEAR = "missing_year"
    MISSING_VENUE = "missing_venue"
    ABSTRACT_SUBSTITUTE = "abstract_substitute"


class CriterionKind(str, Enum):
    INCLUSION = "inclusion"
    EXCLUSION = "exclusion"


class MetadataDimension(str, Enum):
    STUDY = "study"
    CONTEXT = "context"
    OTHER = "other"


@dataclass(frozen=True)
class AuthorName:
    """One author. ``raw`` is preserved verbatim as imported."""

    given: str
    family: str
    raw: str

    @property
    def canonical(self) -> str:
        """Deterministic rendering used for comparison and display."""
        return f"{self.given} {self.family}".strip()


@dataclass(frozen=True)
class Criterion:
    id: str
    kind: CriterionKind
    text: str

    def __post_init__(self) -> None:
        prefix = self.id[:1].upper()
        if prefix == "I" and self.kind is not CriterionKind.INCLUSION:
            raise DataIntegrityError(f"criterion {self.id}: I-prefixed id must be inclusion")
        if prefix == "E" and self.kind is not CriterionKind.EXCLUSION:
            raise DataIntegrityError(f"criterion {self.id}: E-prefixed id must be exclusion")


@dataclass(frozen=True)
class CriterionSet:
    criteria: tuple[Criterion, ...] = ()

    def __post_init__(self) -> None:
        ids = [c.id for c in self.criteria]
        if len(ids) != len(set(ids)):
            raise DataIntegrityError("criterion ids must be unique within a set")

    def __iter__(self) -> Iterator[Criterion]:
        return iter(self.criteria)

    def __len__(self) -> int:
        return len(self.criteria)

    def get(self, criterion_id: str) -> Optional[Criterion]:
        for c in self.criteria:
            if c.id == criterion_id:
                return c
        return None

    def ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.criteria)

    def of_kind(self, kind: CriterionKind) -> tuple[Criterion, ...]:
        return tuple(c for c in self.criteria if c.kind is kind)


@dataclass(frozen=True)
class MetadataClass:
    name: str
    allowed_values: Optional[tuple[str, ...]] = None
    dimension: Optional[MetadataDimension] = None


@dataclass(frozen=True)
class Record:
    """One publication row following the minimal data structure.

    ``id`` is an opaque project-wide token (database prefix + sequence number,
    e.g. ``IEEE-0042``); ``db_no`` is the identifier local to the source
    database so an entry can always be linked back to the originating export.
    """

    id: str
    db_no: str
    title: str
    authors: tuple[AuthorName, ...] = ()
    keywords: tuple[str, ...] = ()
    abstract: str = ""
    year: Optional[int] = None
    publisher_db: str = ""
    venue: str = ""
    vehicle: Vehicle = Vehicle.MISC
    full_text_available: bool = False
    comments: str = ""
    metadata: Mapping[str, str] = field(default_factory=dict)
    completion_flags: frozenset[CompletionFlag] = frozenset()

    def with_fields(self, **changes: object) -> "Record":
        return replace(self, **changes)  # type: ignore[arg-type]


@dataclass(frozen=True)
class Violation:
    """One broken Record invariant; ``code`` is stable, ``detail`` is for humans."""

    code: str
    detail: str = ""

    def __eq__(self, other: object) -> bool:  # allow comparing against bare codes
        if isinstance(other, str):
            return self.code == other
        if isinstance(other, Violation):
            return self.code == other.code and self.detail == other.detail
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.code)


def validate_record(
    record: Record, metadata_classes: Sequence[MetadataClass] = ()
) -> list[Violation]:
    """Return one violation per broken invariant; empty list iff valid.

    Total function: never raises, same input always yields the same list.
    """
    violations: list[Violation] = []
    if not record.id:
        violations.append(Violation("missing_id", "record id must be nonempty"))
    if not record.title.strip():
        violations.append(Violation("missing_title", f"{record.id}: title is empty"))
    if record.year is not None and not (1000 <= record.year <= 9999):
        violations.append(
            Violation("invalid_year", f"{record.id}: year {record.year} is not a 4-digit year")
        )

    flagged = record.completion_flags
    checks = (
        (not record.abstract.strip(), CompletionFlag.MISSING_ABSTRACT, "abstract"),
        (not record.keywords, CompletionFlag.MISSING_KEYWORDS, "keywords"),
        (record.year is None, CompletionFlag.MISSING_YEAR, "year"),
        (not record.venue.strip(), CompletionFlag.MISSING_VENUE, "venue"),
    )
    for is_missing, flag, name in checks:
        if is_missing and flag not in flagged:
            violations.append(
                Violation(f"unflagged_missing_{name}", f"{record.id}: {name} absent without flag")
            )
        if not is_missing and flag in flagged:
            violations.append(
                Violation(f"stale_flag_missing_{name}", f"{record.id}: flag set but {name} present")
            )

    declared = {mc.name: mc for mc in metadata_classes}
    for key, value in record.metadata.items():
        mc = declared.get(key)
        if mc is None:
            violations.append(
                Violation("unknown_metadata_class", f"{record.id}: metadata class {key!r} not declared")
            )
        elif mc.allowed_values is not None and value not in mc.allowed_values:
            violations.append(
                Violation(
                    "metadata_value_not_allowed",
                    f"{record.id}: {value!r} not in vocabulary of {key!r}",
                )
            )
    return violations


class MergeStage(str, Enum):
    PER_DATABASE = "per_database"
    CROSS_DATABASE = "cross_database"


class MergeKind(str, Enum):
    IMPORT = "import"
    INTEGRATE = "integrate"
    DEDUP = "dedup"
    FILTER = "filter"


@dataclass(frozen=True)
class ResolutionNote:
    """Why one record survived a duplicate pair; ``removed`` may cite many rules."""

    kept: str
    removed: str
    rule: str


@dataclass(frozen=True)
class MergeEvent:
    """One step of the integration/cleaning pipeline; the log is append-only."""

    stage: MergeStage
    kind: MergeKind
    inputs: tuple[tuple[str, int], ...]  # (dataset name, size) pairs
    duplicates_removed: int = 0
    resolution_notes: tuple[ResolutionNote, ...] = ()
    criteria_applied: tuple[str, ...] = ()
    label: str = ""
    timestamp: str = ""

    def __post_init__(self) -> None:
        if self.kind in (MergeKind.DEDUP, MergeKind.FILTER):
            if self.duplicates_removed != len(self.resolution_notes):
                raise DataIntegrityError(
                    "duplicates_removed must equal the number of resolution notes"
                )

    @property
    def input_total(self) -> int:
        return sum(size for _, size in self.inputs)


@dataclass(frozen=True)
class Dataset:
    """Ordered, versioned record collection with its merge log."""

    records: tuple[Record, ...] = ()
    merge_log: tuple[MergeEvent, ...] = ()
    revision: int = 0

    def __post_init__(self) -> None:
        ids = [r.id for r in self.records]
        if len(ids) != len(set(ids)):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise DataIntegrityError(f"duplicate record ids in dataset: {dupes}")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[Record]:
        return iter(self.records)

    def ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.records)

    def by_id(self, record_id: str) -> Record:
        for r in self.records:
            if r.id == record_id:
                return r
        raise KeyError(record_id)

    def get(self, record_id: str) -> Optional[Record]:
        for r in self.records:
            if r.id == record_id:
                return r
        return None

    def evolve(
        self,
        records: Sequence[Record],
        event: Optional[MergeEvent] = None,
    ) -> "Dataset":
        """One mutating operation: new snapshot, revision + 1, log appended."""
        log = self.merge_log + (event,) if event is not None else self.merge_log
        return Dataset(records=tuple(records), merge_log=log, revision=self.revision + 1)


class Aggregator(str, Enum):
    HEADCOUNT_SUM = "headcount_sum"
    MEAN = "mean"
    MODE = "mode"
    WEIGHTED_3POINT = "weighted_3point"


class WorkflowKind(str, Enum):
    TWO_REVIEWER_WORKSHOP = "two_reviewer_workshop"
    TWO_PLUS_ONE = "two_plus_one"
    OVERLAPPING_SUBSETS = "overlapping_subsets"
    CUSTOM = "custom"


class ScaleKind(str, Enum):
    BINARY = "binary"
    LIKERT5 = "likert5"


@dataclass(frozen=True)
class Scale:
    kind: ScaleKind
    lo: int
    hi: int
    neutral: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind is ScaleKind.BINARY and (self.lo, self.hi, self.neutral) != (0, 1, None):
            raise DataIntegrityError("binary scale is {0,1} with no neutral value")
        if self.kind is ScaleKind.LIKERT5 and (self.lo, self.hi, self.neutral) != (1, 5, 3):
            raise DataIntegrityError("likert5 scale is {1..5} with neutral 3")

    @classmethod
    def binary(cls) -> "Scale":
        return cls(ScaleKind.BINARY, 0, 1, None)

    @classmethod
    def likert5(cls) -> "Scale":
        return cls(ScaleKind.LIKERT5, 1, 5, 3)

    def contains(self, value: int) -> bool:
        return self.lo <= value <= self.hi

    def values(self) -> tuple[int, ...]:
        return tuple(range(self.lo, self.hi + 1))


@dataclass(frozen=True)
class SelectionPolicy:
    """How votes are aggregated and turned into in/out decisions."""

    scale: Scale = field(default_factory=Scale.binary)
    threshold: float = 1.0
    aggregator: Aggregator = Aggregator.HEADCOUNT_SUM
    reviewer_weights: Mapping[str, float] = field(default_factory=dict)
    workflow: WorkflowKind = WorkflowKind.TWO_PLUS_ONE
    # criteria cited when the vote aggregate itself excludes a paper
    vote_exclusion_criteria: tuple[str, ...] = ()
    # optional round-half-up after the 3-point rating, for integer thresholds
    round_three_point: bool = False

    def __post_init__(self) -> None:
        for reviewer, weight in self.reviewer_weights.items():
            if weight <= 0:
                raise DataIntegrityError(f"weight for reviewer {reviewer!r} must be positive")
        span_lo = self.scale.lo
        if self.threshold < span_lo - 1 or self.threshold > self.scale.hi * 100:
            raise DataIntegrityError("threshold outside any achievable rating range")


@dataclass(frozen=True)
class Reviewer:
    id: str
    token: str = ""
    role: str = "reviewer"  # reviewer | moderator


@dataclass(frozen=True)
class StoredQuery:
    label: str
    text: str
    database: str = ""  # empty = generic form of the query


@dataclass(frozen=True)
class Project:
    """Everything a literature study accumulates before the in-depth analysis."""

    name: str
    research_questions: tuple[str, ...] = ()
    criteria: CriterionSet = field(default_factory=CriterionSet)
    metadata_classes: tuple[MetadataClass, ...] = ()
    sources: tuple[str, ...] = ()
    queries: tuple[StoredQuery, ...] = ()
    selection_policy: SelectionPolicy = field(default_factory=SelectionPolicy)
    reviewers: tuple[Reviewer, ...] = ()
    raw: Mapping[str, Dataset] = field(default_factory=dict)
    integrated: Optional[Dataset] = None
    decided: Optional[Dataset] = None
    baseline_revision: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.name:
            raise PreconditionError("project name must be nonempty")
        names = [mc.name for mc in self.metadata_classes]
        if len(names) != len(set(names)):
            raise DataIntegrityError("metadata class names must be unique per project")
        if self.decided is not None:
            integrated_ids = set(self.integrated.ids()) if self.integrated else set()
            missing = [r.id for r in self.decided if r.id not in integrated_ids]
            if missing:
                raise DataIntegrityError(
                    f"decided dataset contains ids absent from the integrated dataset: {missing}"
                )

    def reviewer_ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.reviewers)

    def with_fields(self, **changes: object) -> "Project":
        return replace(self, **changes)  # type: ignore[arg-type]


# Standard template content. The research questions and criteria below are the
# generic, topic-agnostic defaults a new study starts from; [topic] is meant to
# be replaced by the study team.

STANDARD_RESEARCH_QUESTIONS: tuple[str, ...] = (
    "Which/how many publications on [topic] are published?",
    "Which/how many publications on [topic] are published over the years?",
    "What is the scientific maturity of the publication set?",
    "What is the contribution of the publication set?",
    "What are observable mainstreams in the publication set?",
    "What new approaches for [topic] are available?",
)

STANDARD_CRITERIA: tuple[tuple[str, CriterionKind, str], ...] = (
    ("I1", CriterionKind.INCLUSION,
     "Title, keyword list, and abstract make explicit that the paper is related to [topic]."),
    ("I2", CriterionKind.INCLUSION,
     "The paper presents [topic]-related contributions, e.g., [topic list]."),
    ("E3", CriterionKind.EXCLUSION,
     "The paper is not in English [or any other language of interest]."),
    ("E4", CriterionKind.EXCLUSION,
     "The paper is not in the domain [domain name(s)]."),
    ("E5", CriterionKind.EXCLUSION,
     "The paper is a tutorial-, workshop-, or poster summary only."),
    ("E6", CriterionKind.EXCLUSION,
     "The paper relates to [topic] in its related work only."),
    ("E7", CriterionKind.EXCLUSION,
     "The paper occurs multiple times in the result set."),
    ("E8", CriterionKind.EXCLUSION,
     "The paper's full text is not available for download."),
)

# Criterion conventionally cited when a duplicate occurrence is removed.
DUPLICATE_CRITERION_ID = "E7"

# Criterion stamped onto papers voted out during relevance screening.
VOTE_EXCLUSION_CRITERION_ID = "E4"

STANDARD_METADATA_CLASSES: tuple[MetadataClass, ...] = (
    MetadataClass("Study", dimension=MetadataDimension.STUDY),
    MetadataClass("Context", dimension=MetadataDimension.CONTEXT),
)


def new_project(name: str, template: str = "standard") -> Project:
    """Create a fresh project from the ``standard`` or ``blank`` template."""
    if not name:
        raise PreconditionError("project name must be nonempty")
    if template == "blank":
        return Project(name=name)
    if template != "standard":
        raise PreconditionError(f"unknown template {template!r}")
    criteria = CriterionSet(tuple(Criterion(i, k, t) for i, k, t in STANDARD_CRITERIA))
    return Project(
        name=name,
        research_questions=STANDARD_RESEARCH_QUESTIONS,
        criteria=criteria,
        metadata_classes=STANDARD_METADATA_CLASSES,
        selection_policy=SelectionPolicy(
            vote_exclusion_criteria=(VOTE_EXCLUSION_CRITERION_ID,)
        ),
    )


def record_database(record: Record) -> str:
    """Source database of a record: the Publisher/Database field, or the id prefix."""
    if record.publisher_db:
        return record.publisher_db
    prefix, _, _ = record.id.rpartition("-")
    return prefix


def database_of_id(record_id: str) -> str:
    """Database prefix of a stamped record id (ids are ``{database}-{seq}``)."""
    prefix, _, _ = record_id.rpartition("-")
    return prefix


def ensure_unique_ids(parts: Iterable[tuple[str, Dataset]]) -> None:
    """Raise if any record id occurs in more than one of the given datasets."""
    seen: dict[str, str] = {}
    for name, dataset in parts:
        for record in dataset:
            if record.id in seen:
                raise DataIntegrityError(
                    f"record id {record.id!r} occurs in both {seen[record.id]!r} and {name!r};"
                    " re-namespace ids before integrating"
                )
            seen[record.id] = name
