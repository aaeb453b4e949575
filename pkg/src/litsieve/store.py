"""Plain-text persistence for a study project.

A project lives in one directory: a JSON manifest, each dataset as a CSV
file with exactly the minimal-data-structure column order, merge logs as
JSON lines, and append-only vote and decision logs. Everything is diffable
text so the whole study can sit in version control.
"""

from __future__ import annotations

import csv
import io
import json
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

from .errors import ParseError, PreconditionError
from .merge import normalize_author
from .model import (
    CompletionFlag,
    Criterion,
    CriterionKind,
    CriterionSet,
    Dataset,
    MergeEvent,
    MergeKind,
    MergeStage,
    MetadataClass,
    MetadataDimension,
    Project,
    Record,
    ResolutionNote,
    Reviewer,
    Scale,
    ScaleKind,
    SelectionPolicy,
    StoredQuery,
    Vehicle,
    Aggregator,
    WorkflowKind,
)
from .selection import (
    DecidedBy,
    Decision,
    Relevance,
    Vote,
    assignment_from_csv,
    assignment_to_csv,
)

FORMAT_VERSION = 1

PROJECT_FILE = "project.json"
DATASET_DIR = "datasets"
VOTES_FILE = "votes.jsonl"
DECISIONS_FILE = "decisions.jsonl"
ASSIGNMENT_FILE = "assignment.csv"
LOCK_FILE = "lock"

# Fixed columns of the dataset CSV; metadata-class columns are spliced in
# between the comments column and the trailing bookkeeping columns.
_HEAD_COLUMNS = (
    "No.",
    "DB-No.",
    "Title",
    "Authors",
    "Keywords",
    "Abstract",
    "Year",
    "Publisher/Database",
    "Source/Venue",
)
_VEHICLE_COLUMNS = tuple(v.value.capitalize() for v in Vehicle)
_COMMENT_COLUMN = "General Comments"
_TAIL_COLUMNS = ("Full Text Available", "Completion Flags")


def dataset_header(metadata_classes: Sequence[str]) -> Tuple[str, ...]:
    return (
        _HEAD_COLUMNS
        + _VEHICLE_COLUMNS
        + (_COMMENT_COLUMN,)
        + tuple(metadata_classes)
        + _TAIL_COLUMNS
    )


def _record_row(record: Record, metadata_classes: Sequence[str]) -> List[str]:
    row = [
        record.id,
        record.db_no,
        record.title,
        " and ".join(a.raw for a in record.authors),
        "; ".join(record.keywords),
        record.abstract,
        str(record.year) if record.year is not None else "",
        record.publisher_db,
        record.venue,
    ]
    for vehicle in Vehicle:
        row.append("x" if record.vehicle is vehicle else "")
    row.append(record.comments)
    for cls in metadata_classes:
        row.append(record.metadata.get(cls, ""))
    row.append("yes" if record.full_text_available else "no")
    row.append(";".join(sorted(f.value for f in record.completion_flags)))
    return row


def dataset_to_csv(d: Dataset, metadata_classes: Sequence[str] = ()) -> str:
    """Serialize records in the canonical column order.

    metadata_classes fixes which metadata columns appear and in what order;
    values for classes a record does not carry stay empty.
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(dataset_header(metadata_classes))
    for record in d.records:
        writer.writerow(_record_row(record, metadata_classes))
    return buffer.getvalue()


def _split_header(header: Sequence[str]) -> Tuple[Tuple[str, ...], int]:
    fixed_prefix = _HEAD_COLUMNS + _VEHICLE_COLUMNS + (_COMMENT_COLUMN,)
    if tuple(header[: len(fixed_prefix)]) != fixed_prefix:
        raise ParseError("dataset CSV header does not match the canonical column order", line=1)
    if tuple(header[-2:]) != _TAIL_COLUMNS:
        raise ParseError("dataset CSV header does not end with the bookkeeping columns", line=1)
    metadata = tuple(header[len(fixed_prefix) : len(header) - 2])
    return metadata, len(fixed_prefix)


def _row_record(row: Sequence[str], metadata_classes: Sequence[str], line: int) -> Record:
    head = dict(zip(_HEAD_COLUMNS, row))
    marked = [
        vehicle
        for vehicle, cell in zip(Vehicle, row[len(_HEAD_COLUMNS) : len(_HEAD_COLUMNS) + len(_VEHICLE_COLUMNS)])
        if cell.strip()
    ]
    if len(marked) > 1:
        raise ParseError("more than one publication-vehicle column is marked", line=line)
    comments = row[len(_HEAD_COLUMNS) + len(_VEHICLE_COLUMNS)]
    meta_start = len(_HEAD_COLUMNS) + len(_VEHICLE_COLUMNS) + 1
    metadata = {
        cls: row[meta_start + i]
        for i, cls in enumerate(metadata_classes)
        if row[meta_start + i].strip()
    }
    full_text = row[-2].strip().lower() == "yes"
    flags = frozenset(
        CompletionFlag(v) for v in row[-1].split(";") if v.strip()
    )
    year_text = head["Year"].strip()
    authors = tuple(
        normalize_author(a.strip())
        for a in head["Authors"].split(" and ")
        if a.strip()
    )
    return Record(
        id=head["No."],
        db_no=head["DB-No."],
        title=head["Title"],
        authors=authors,
        keywords=tuple(k.strip() for k in head["Keywords"].split(";") if k.strip()),
        abstract=head["Abstract"],
        year=int(year_text) if year_text else None,
        publisher_db=head["Publisher/Database"],
        venue=head["Source/Venue"],
        vehicle=marked[0] if marked else Vehicle.MISC,
        full_text_available=full_text,
        comments=comments,
        metadata=metadata,
        completion_flags=flags,
    )


def dataset_from_csv(
    text: str, merge_log: Tuple[MergeEvent, ...] = (), revision: int = 0
) -> Dataset:
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        raise ParseError("dataset CSV is empty", line=1)
    metadata_classes, _ = _split_header(rows[0])
    expected_width = len(rows[0])
    records = []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != expected_width:
            raise ParseError("row width does not match the header", line=i)
        records.append(_row_record(row, metadata_classes, i))
    return Dataset(records=tuple(records), merge_log=merge_log, revision=revision)


# --- merge log / vote / decision JSON-lines codecs ---


def merge_event_to_json(event: MergeEvent) -> dict:
    return {
        "stage": event.stage.value,
        "kind": event.kind.value,
        "inputs": [[name, size] for name, size in event.inputs],
        "duplicates_removed": event.duplicates_removed,
        "resolution_notes": [
            {"kept": n.kept, "removed": n.removed, "rule": n.rule}
            for n in event.resolution_notes
        ],
        "criteria_applied": list(event.criteria_applied),
        "label": event.label,
        "timestamp": event.timestamp,
    }


def merge_event_from_json(data: Mapping) -> MergeEvent:
    return MergeEvent(
        stage=MergeStage(data["stage"]),
        kind=MergeKind(data["kind"]),
        inputs=tuple((name, int(size)) for name, size in data["inputs"]),
        duplicates_removed=int(data.get("duplicates_removed", 0)),
        resolution_notes=tuple(
            ResolutionNote(kept=n["kept"], removed=n["removed"], rule=n["rule"])
            for n in data.get("resolution_notes", ())
        ),
        criteria_applied=tuple(data.get("criteria_applied", ())),
        label=data.get("label", ""),
        timestamp=data.get("timestamp", ""),
    )


def merge_log_to_jsonl(events: Iterable[MergeEvent]) -> str:
    return "".join(
        json.dumps(merge_event_to_json(e), sort_keys=True) + "\n" for e in events
    )


def merge_log_from_jsonl(text: str) -> Tuple[MergeEvent, ...]:
    events = []
    for i, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            events.append(merge_event_from_json(json.loads(line)))
        except (ValueError, KeyError) as exc:
            raise ParseError(f"bad merge-log line: {exc}", line=i)
    return tuple(events)


def vote_to_json(vote: Vote) -> dict:
    return {
        "reviewer": vote.reviewer,
        "paper": vote.paper,
        "value": vote.value,
        "round": vote.round,
        "timestamp": vote.timestamp,
    }


def vote_from_json(data: Mapping) -> Vote:
    return Vote(
        reviewer=data["reviewer"],
        paper=data["paper"],
        value=int(data["value"]),
        round=int(data.get("round", 1)),
        timestamp=data.get("timestamp", ""),
    )


def decision_to_json(decision: Decision) -> dict:
    return {
        "paper": decision.paper,
        "state": decision.state.value,
        "decided_by": decision.decided_by.value,
        "criteria_applied": list(decision.criteria_applied),
        "timestamp": decision.timestamp,
    }


def decision_from_json(data: Mapping) -> Decision:
    return Decision(
        paper=data["paper"],
        state=Relevance(data["state"]),
        decided_by=DecidedBy(data["decided_by"]),
        criteria_applied=tuple(data.get("criteria_applied", ())),
        timestamp=data.get("timestamp", ""),
    )


# --- BibTeX writer ---

_VEHICLE_ENTRY_TYPES = {
    Vehicle.JOURNAL: "article",
    Vehicle.MAGAZINE: "article",
    Vehicle.CONFERENCE: "inproceedings",
    Vehicle.WORKSHOP: "inproceedings",
    Vehicle.BOOK: "book",
    Vehicle.CHAPTER: "incollection",
    Vehicle.THESIS: "phdthesis",
    Vehicle.MISC: "misc",
}


def _bib_value(text: str) -> str:
    # values are written brace-delimited; embedded braces would unbalance them
    return text.replace("{", "(").replace("}", ")")


def records_to_bibtex(records: Iterable[Record]) -> str:
    """Render records as BibTeX entries keyed by their project id."""
    chunks = []
    for r in records:
        entry_type = _VEHICLE_ENTRY_TYPES[r.vehicle]
        fields: List[Tuple[str, str]] = [("title", r.title)]
        if r.authors:
            fields.append(("author", " and ".join(a.raw for a in r.authors)))
        if r.venue:
            venue_field = "journal" if entry_type == "article" else (
                "booktitle" if entry_type in ("inproceedings", "incollection") else "note"
            )
            fields.append((venue_field, r.venue))
        if r.year is not None:
            fields.append(("year", str(r.year)))
        if r.keywords:
            fields.append(("keywords", "; ".join(r.keywords)))
        if r.abstract:
            fields.append(("abstract", r.abstract))
        body = ",\n".join(f"  {name} = {{{_bib_value(value)}}}" for name, value in fields)
        chunks.append(f"@{entry_type}{{{r.id},\n{body}\n}}\n")
    return "\n".join(chunks)


# --- project manifest codec ---


def _policy_to_json(policy: SelectionPolicy) -> dict:
    return {
        "scale": {
            "kind": policy.scale.kind.value,
            "lo": policy.scale.lo,
            "hi": policy.scale.hi,
            "neutral": policy.scale.neutral,
        },
        "threshold": policy.threshold,
        "aggregator": policy.aggregator.value,
        "reviewer_weights": dict(policy.reviewer_weights),
        "workflow": policy.workflow.value,
        "vote_exclusion_criteria": list(policy.vote_exclusion_criteria),
        "round_three_point": policy.round_three_point,
    }


def _policy_from_json(data: Mapping) -> SelectionPolicy:
    s = data["scale"]
    return SelectionPolicy(
        scale=Scale(
            kind=ScaleKind(s["kind"]),
            lo=int(s["lo"]),
            hi=int(s["hi"]),
            neutral=s["neutral"],
        ),
        threshold=float(data["threshold"]),
        aggregator=Aggregator(data["aggregator"]),
        reviewer_weights=dict(data.get("reviewer_weights", {})),
        workflow=WorkflowKind(data["workflow"]),
        vote_exclusion_criteria=tuple(data.get("vote_exclusion_criteria", ())),
        round_three_point=bool(data.get("round_three_point", False)),
    )


def project_to_json(project: Project, slots: Mapping[str, object]) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "name": project.name,
        "research_questions": list(project.research_questions),
        "criteria": [
            {"id": c.id, "kind": c.kind.value, "text": c.text} for c in project.criteria
        ],
        "metadata_classes": [
            {
                "name": mc.name,
                "allowed_values": list(mc.allowed_values) if mc.allowed_values else None,
                "dimension": mc.dimension.value if mc.dimension else None,
            }
            for mc in project.metadata_classes
        ],
        "sources": list(project.sources),
        "queries": [
            {"label": q.label, "text": q.text, "database": q.database}
            for q in project.queries
        ],
        "selection_policy": _policy_to_json(project.selection_policy),
        "reviewers": [
            {"id": r.id, "token": r.token, "role": r.role} for r in project.reviewers
        ],
        "baseline_revision": project.baseline_revision,
        "slots": slots,
    }


def _project_from_json(data: Mapping) -> Project:
    return Project(
        name=data["name"],
        research_questions=tuple(data.get("research_questions", ())),
        criteria=CriterionSet(
            tuple(
                Criterion(c["id"], CriterionKind(c["kind"]), c["text"])
                for c in data.get("criteria", ())
            )
        ),
        metadata_classes=tuple(
            MetadataClass(
                name=mc["name"],
                allowed_values=tuple(mc["allowed_values"]) if mc.get("allowed_values") else None,
                dimension=MetadataDimension(mc["dimension"]) if mc.get("dimension") else None,
            )
            for mc in data.get("metadata_classes", ())
        ),
        sources=tuple(data.get("sources", ())),
        queries=tuple(
            StoredQuery(q["label"], q["text"], q.get("database", ""))
            for q in data.get("queries", ())
        ),
        selection_policy=_policy_from_json(data["selection_policy"]),
        reviewers=tuple(
            Reviewer(r["id"], r.get("token", ""), r.get("role", "reviewer"))
            for r in data.get("reviewers", ())
        ),
        baseline_revision=data.get("baseline_revision"),
    )


class ProjectStore:
    """Directory-backed project persistence with an advisory write lock."""

    def __init__(self, root: str | os.PathLike) -> None:
        self.root = Path(root)

    # -- paths --

    @property
    def project_path(self) -> Path:
        return self.root / PROJECT_FILE

    def _dataset_paths(self, slot: str) -> Tuple[Path, Path]:
        safe = slot.replace("/", "_").replace(os.sep, "_")
        base = self.root / DATASET_DIR / safe
        return base.with_suffix(".csv"), base.with_suffix(".jsonl")

    def exists(self) -> bool:
        return self.project_path.is_file()

    # -- whole-project save/load --

    def _write_dataset(self, slot: str, d: Dataset, metadata_classes: Sequence[str]) -> dict:
        csv_path, log_path = self._dataset_paths(slot)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        csv_path.write_text(dataset_to_csv(d, metadata_classes), encoding="utf-8")
        log_path.write_text(merge_log_to_jsonl(d.merge_log), encoding="utf-8")
        return {
            "file": f"{DATASET_DIR}/{csv_path.name}",
            "log": f"{DATASET_DIR}/{log_path.name}",
            "revision": d.revision,
        }

    def _read_dataset(self, entry: Mapping) -> Dataset:
        csv_path = self.root / entry["file"]
        log_path = self.root / entry["log"]
        log = merge_log_from_jsonl(log_path.read_text(encoding="utf-8")) if log_path.is_file() else ()
        return dataset_from_csv(
            csv_path.read_text(encoding="utf-8"),
            merge_log=log,
            revision=int(entry["revision"]),
        )

    def save(self, project: Project) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        classes = [mc.name for mc in project.metadata_classes]
        slots: Dict[str, object] = {"raw": {}}
        for db in sorted(project.raw):
            slots["raw"][db] = self._write_dataset(f"raw_{db}", project.raw[db], classes)
        slots["integrated"] = (
            self._write_dataset("integrated", project.integrated, classes)
            if project.integrated is not None
            else None
        )
        slots["decided"] = (
            self._write_dataset("decided", project.decided, classes)
            if project.decided is not None
            else None
        )
        payload = json.dumps(project_to_json(project, slots), indent=2, sort_keys=True)
        self.project_path.write_text(payload + "\n", encoding="utf-8")

    def load(self) -> Project:
        if not self.exists():
            raise PreconditionError(
                f"no project found at {self.root}", details={"path": str(self.root)}
            )
        data = json.loads(self.project_path.read_text(encoding="utf-8"))
        project = _project_from_json(data)
        slots = data.get("slots", {})
        raw = {
            db: self._read_dataset(entry)
            for db, entry in sorted(slots.get("raw", {}).items())
        }
        integrated = self._read_dataset(slots["integrated"]) if slots.get("integrated") else None
        decided = self._read_dataset(slots["decided"]) if slots.get("decided") else None
        return project.with_fields(raw=raw, integrated=integrated, decided=decided)

    # -- append-only logs --

    def _append_jsonl(self, name: str, rows: Iterable[dict]) -> None:
        path = self.root / name
        with path.open("a", encoding="utf-8") as handle:
            for row in rows:
                handle.write(json.dumps(row, sort_keys=True) + "\n")

    def _load_jsonl(self, name: str) -> List[dict]:
        path = self.root / name
        if not path.is_file():
            return []
        rows = []
        for i, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except ValueError as exc:
                raise ParseError(f"bad log line in {name}: {exc}", line=i)
        return rows

    def append_votes(self, votes: Iterable[Vote]) -> None:
        self._append_jsonl(VOTES_FILE, (vote_to_json(v) for v in votes))

    def load_votes(self) -> List[Vote]:
        return [vote_from_json(row) for row in self._load_jsonl(VOTES_FILE)]

    def append_decisions(self, decisions: Iterable[Decision]) -> None:
        self._append_jsonl(DECISIONS_FILE, (decision_to_json(d) for d in decisions))

    def load_decisions(self) -> List[Decision]:
        return [decision_from_json(row) for row in self._load_jsonl(DECISIONS_FILE)]

    # -- reviewer assignment --

    def save_assignment(self, assignment: Mapping[str, Sequence[str]]) -> None:
        path = self.root / ASSIGNMENT_FILE
        path.write_text(assignment_to_csv(assignment), encoding="utf-8")

    def load_assignment(self) -> Optional[Dict[str, Tuple[str, ...]]]:
        path = self.root / ASSIGNMENT_FILE
        if not path.is_file():
            return None
        return assignment_from_csv(path.read_text(encoding="utf-8"))

    # -- advisory lock --

    @contextmanager
    def lock(self) -> Iterator[None]:
        """Exclusive advisory lock for writers; readers never need it."""
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.root / LOCK_FILE
        try:
            fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise PreconditionError(
                "another writer holds the project lock",
                details={"lock": str(path)},
            )
        try:
            os.write(fd, str(os.getpid()).encode("ascii"))
            os.close(fd)
            yield
        finally:
            try:
                path.unlink()
            except FileNotFoundError:
                pass
