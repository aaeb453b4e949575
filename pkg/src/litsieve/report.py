"""Search-and-selection funnel and the handover bundle.

The funnel is reconstructed from the merge log and the decision log, never
hand-entered: query rows come from import events, the duplicate rows from
dedup events, the filter rows from filter events, and the final row from
the recorded relevance decisions. The bundle exporter writes every
deliverable the in-depth analysis phase needs, with a checksum manifest.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import DataIntegrityError, PreconditionError
from .model import (
    Dataset,
    MergeEvent,
    MergeKind,
    MergeStage,
    Project,
    database_of_id,
)
from .selection import DecidedBy, Decision, Relevance
from .store import dataset_to_csv, merge_log_to_jsonl, records_to_bibtex

LABEL_WIDTH = 44
CELL_WIDTH = 10

SECTION_SEARCH = "Step 1: Search"
SECTION_DEDUP = "Step 2: Removing Duplicates"
SECTION_FILTER = "Step 3: In-depth Filtering"
SECTION_VOTING = "Step 4: Voting"

ROW_PER_DB_DUPLICATES = "Duplicates per database"
ROW_CROSS_DUPLICATES = "Duplicates across all databases"
ROW_UNFILTERED = "Unfiltered"
ROW_RESULT_SET = "Result set (search process)"
ROW_FINAL = "Final result set"


@dataclass(frozen=True)
class FunnelRow:
    """One report line: a label, one count per database (None renders --), a total."""

    label: str
    cells: Mapping[str, Optional[int]]
    total: int

    def __post_init__(self) -> None:
        known = [v for v in self.cells.values() if v is not None]
        if any(v < 0 for v in known):
            raise DataIntegrityError(
                "negative funnel cell; the logs remove more than they added",
                details={"row": self.label},
            )
        if sum(known) != self.total:
            raise DataIntegrityError(
                "funnel row total does not equal the sum of its cells",
                details={"row": self.label, "total": self.total},
            )


@dataclass(frozen=True)
class FunnelSection:
    title: str
    rows: Tuple[FunnelRow, ...] = ()


@dataclass(frozen=True)
class FunnelReport:
    databases: Tuple[str, ...] = ()
    sections: Tuple[FunnelSection, ...] = ()

    def section(self, title: str) -> FunnelSection:
        for s in self.sections:
            if s.title == title:
                return s
        raise KeyError(title)


def _attribute_notes(event: MergeEvent, running: Mapping[str, int]) -> Dict[str, int]:
    removed: Dict[str, int] = {}
    for note in event.resolution_notes:
        db = database_of_id(note.removed)
        if db not in running:
            raise DataIntegrityError(
                "removed record id does not map onto a known database",
                details={"id": note.removed},
            )
        removed[db] = removed.get(db, 0) + 1
    return removed


def _check_conservation(event: MergeEvent, running: Mapping[str, int]) -> None:
    for name, size in event.inputs:
        if name in running and running[name] != size:
            raise DataIntegrityError(
                "merge event input size disagrees with the running count",
                details={"dataset": name, "logged": size, "running": running[name]},
            )


def build_funnel(
    events: Sequence[MergeEvent],
    decisions: Iterable[Decision] = (),
    databases: Optional[Sequence[str]] = None,
) -> FunnelReport:
    """Reconstruct the four-step report from the logs.

    Counts illustrate what REMAINS per database after each step; filter
    rows show -- for databases the filter never touched. Databases default
    to first appearance order among import events.
    """
    if isinstance(decisions, Mapping):
        decisions = decisions.values()
    # the decision log is append-only and may restate a paper; last entry wins
    by_paper: Dict[str, Decision] = {d.paper: d for d in decisions}
    decisions = list(by_paper.values())
    imports = [e for e in events if e.kind is MergeKind.IMPORT]
    others = [e for e in events if e.kind is not MergeKind.IMPORT]
    if not imports and others:
        raise PreconditionError(
            "merge log has later stages but no recorded searches",
            details={"stage": "search"},
        )

    seen: List[str] = []
    for e in imports:
        for name, _ in e.inputs:
            if name not in seen:
                seen.append(name)
    dbs: Tuple[str, ...] = tuple(databases) if databases is not None else tuple(seen)

    # Step 1: one row per query label, imports summed per database.
    labels: List[str] = []
    hits: Dict[str, Dict[str, int]] = {}
    raw: Dict[str, int] = {db: 0 for db in dbs}
    for e in imports:
        if e.label not in labels:
            labels.append(e.label)
            hits[e.label] = {}
        for name, size in e.inputs:
            if name not in raw:
                continue
            hits[e.label][name] = hits[e.label].get(name, 0) + size
            raw[name] += size
    search_rows = tuple(
        FunnelRow(
            label=label,
            cells={db: hits[label].get(db) for db in dbs},
            total=sum(hits[label].values()),
        )
        for label in labels
    )

    # Step 2: removal tallies by stage.
    per_db_removed: Dict[str, int] = {db: 0 for db in dbs}
    cross_removed: Dict[str, int] = {db: 0 for db in dbs}
    filter_events: List[MergeEvent] = []
    for e in others:
        if e.kind is MergeKind.DEDUP:
            if e.stage is MergeStage.PER_DATABASE and len(e.inputs) == 1 and e.inputs[0][0] in raw:
                db = e.inputs[0][0]
                if raw[db] - per_db_removed[db] != e.inputs[0][1]:
                    raise DataIntegrityError(
                        "dedup event input size disagrees with the running count",
                        details={"dataset": db},
                    )
                per_db_removed[db] += e.duplicates_removed
            else:
                tally = per_db_removed if e.stage is MergeStage.PER_DATABASE else cross_removed
                for db, n in _attribute_notes(e, raw).items():
                    tally[db] += n
        elif e.kind is MergeKind.FILTER:
            filter_events.append(e)
        elif e.kind is MergeKind.INTEGRATE:
            current = {db: raw[db] - per_db_removed[db] for db in dbs}
            _check_conservation(e, current)

    after_per_db = {db: raw[db] - per_db_removed[db] for db in dbs}
    after_cross = {db: after_per_db[db] - cross_removed[db] for db in dbs}
    dedup_rows = (
        FunnelRow(ROW_PER_DB_DUPLICATES, dict(after_per_db), sum(after_per_db.values())),
        FunnelRow(ROW_CROSS_DUPLICATES, dict(after_cross), sum(after_cross.values())),
    )

    # Step 3: one row per filter event, then the untouched column and the result set.
    running = dict(after_cross)
    touched: set = set()
    filter_rows: List[FunnelRow] = []
    for e in filter_events:
        _check_conservation(e, running)
        removed = _attribute_notes(e, running)
        event_dbs = [name for name, _ in e.inputs if name in running] or sorted(removed)
        touched.update(event_dbs)
        for db in event_dbs:
            running[db] -= removed.get(db, 0)
        cells = {db: (running[db] if db in event_dbs else None) for db in dbs}
        filter_rows.append(
            FunnelRow(e.label or "Filtered", cells, sum(v for v in cells.values() if v is not None))
        )
    untouched = [db for db in dbs if db not in touched]
    if filter_events and untouched:
        cells = {db: (running[db] if db in untouched else None) for db in dbs}
        filter_rows.append(
            FunnelRow(ROW_UNFILTERED, cells, sum(v for v in cells.values() if v is not None))
        )
    filter_rows.append(FunnelRow(ROW_RESULT_SET, dict(running), sum(running.values())))

    # Step 4: relevant decisions, attributed by record id prefix.
    final: Dict[str, int] = {db: 0 for db in dbs}
    for decision in decisions:
        if decision.state is Relevance.RELEVANT:
            db = database_of_id(decision.paper)
            if db in final:
                final[db] += 1
    voting_rows = (FunnelRow(ROW_FINAL, dict(final), sum(final.values())),)

    totals = [
        sum(after_per_db.values()),
        sum(after_cross.values()),
        sum(running.values()),
        sum(final.values()),
    ]
    for before, after in zip(totals, totals[1:]):
        if after > before:
            raise DataIntegrityError(
                "funnel totals grow between steps; the logs are inconsistent",
                details={"totals": totals},
            )

    return FunnelReport(
        databases=dbs,
        sections=(
            FunnelSection(SECTION_SEARCH, search_rows),
            FunnelSection(SECTION_DEDUP, dedup_rows),
            FunnelSection(SECTION_FILTER, tuple(filter_rows)),
            FunnelSection(SECTION_VOTING, voting_rows),
        ),
    )


def funnel_for_project(project: Project, decisions: Iterable[Decision] = ()) -> FunnelReport:
    """Funnel over the most advanced dataset's log the project has."""
    if project.decided is not None:
        events = project.decided.merge_log
    elif project.integrated is not None:
        events = project.integrated.merge_log
    else:
        events = tuple(e for db in sorted(project.raw) for e in project.raw[db].merge_log)
    databases = project.sources or None
    return build_funnel(events, decisions, databases=databases)


def _format_cell(value: Optional[int]) -> str:
    return ("--" if value is None else f"{value:,}").rjust(CELL_WIDTH)


def render_text(report: FunnelReport) -> str:
    """Fixed-width text rendering of the funnel."""
    title = "Search and selection report"
    header = "Step".ljust(LABEL_WIDTH) + "".join(
        db.rjust(CELL_WIDTH) for db in report.databases
    ) + "Total".rjust(CELL_WIDTH)
    lines = [title, "=" * len(title), "", header, "-" * len(header)]
    for section in report.sections:
        lines.append("")
        lines.append(section.title)
        for row in section.rows:
            cells = "".join(_format_cell(row.cells.get(db)) for db in report.databases)
            lines.append(
                "  " + row.label.ljust(LABEL_WIDTH - 2) + cells + _format_cell(row.total)
            )
    return "\n".join(lines) + "\n"


def funnel_json(report: FunnelReport) -> dict:
    return {
        "databases": list(report.databases),
        "sections": [
            {
                "title": s.title,
                "rows": [
                    {
                        "label": r.label,
                        "cells": {db: r.cells.get(db) for db in report.databases},
                        "total": r.total,
                    }
                    for r in s.rows
                ],
            }
            for s in report.sections
        ],
    }


def funnel_csv(report: FunnelReport) -> str:
    import csv as _csv
    import io as _io

    buffer = _io.StringIO()
    writer = _csv.writer(buffer, lineterminator="\n")
    writer.writerow(["section", "label", *report.databases, "total"])
    for section in report.sections:
        for row in section.rows:
            writer.writerow(
                [
                    section.title,
                    row.label,
                    *[
                        "" if row.cells.get(db) is None else row.cells.get(db)
                        for db in report.databases
                    ],
                    row.total,
                ]
            )
    return buffer.getvalue()


# --- handover bundle ---

GROUP_QUERIES = "search_queries"
GROUP_CRITERIA = "criteria"
GROUP_RAW = "raw_result_sets"
GROUP_INTEGRATED = "integrated_dataset"
GROUP_APPROACH = "selection_approach"
GROUP_DECIDED = "decided_dataset"

ALL_GROUPS = (
    GROUP_QUERIES,
    GROUP_CRITERIA,
    GROUP_RAW,
    GROUP_INTEGRATED,
    GROUP_APPROACH,
    GROUP_DECIDED,
)


@dataclass(frozen=True)
class HandoverBundle:
    """What was written where; absent groups carry an explicit reason."""

    root: str
    groups: Mapping[str, Tuple[str, ...]]
    absent: Mapping[str, str] = field(default_factory=dict)
    manifest_path: str = "manifest.json"

    def __post_init__(self) -> None:
        for group in ALL_GROUPS:
            if group not in self.groups and group not in self.absent:
                raise DataIntegrityError(
                    "bundle must account for every deliverable group",
                    details={"missing": group},
                )


def _json_text(data: object) -> str:
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _sha256_text(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(path.read_bytes())
    return digest.hexdigest()


def export_bundle(
    project: Project,
    path: str | Path,
    decisions: Sequence[Decision] = (),
) -> HandoverBundle:
    """Write the six handover deliverable groups plus a checksum manifest.

    Requires a finalized project (a decided dataset). Output is a pure
    function of project state, so re-exporting the same revision yields
    byte-identical files.
    """
    if project.decided is None:
        raise PreconditionError(
            "the project has no decided dataset yet; run finalize before exporting"
        )
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    classes = [mc.name for mc in project.metadata_classes]
    groups: Dict[str, Tuple[str, ...]] = {}
    absent: Dict[str, str] = {}

    def write(rel: str, text: str) -> str:
        target = root / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text, encoding="utf-8")
        return rel

    # 1. search queries, generic and database-specific
    queries = [
        {"label": q.label, "text": q.text, "database": q.database}
        for q in project.queries
    ]
    groups[GROUP_QUERIES] = (write("queries/search_queries.json", _json_text(queries)),)

    # 2. in-/exclusion criteria
    criteria = [
        {"id": c.id, "kind": c.kind.value, "text": c.text} for c in project.criteria
    ]
    groups[GROUP_CRITERIA] = (write("criteria/criteria.json", _json_text(criteria)),)

    # 3. database list and the raw result sets, untouched
    if project.raw:
        files = [write("raw/databases.json", _json_text(sorted(project.raw)))]
        for db in sorted(project.raw):
            files.append(
                write(f"raw/raw_{db}.csv", dataset_to_csv(project.raw[db], classes))
            )
        groups[GROUP_RAW] = tuple(files)
    else:
        absent[GROUP_RAW] = "no raw result sets were retained in this project"

    # 4. cleaned, integrated dataset with its full merge log
    if project.integrated is not None:
        groups[GROUP_INTEGRATED] = (
            write("integrated/integrated.csv", dataset_to_csv(project.integrated, classes)),
            write("integrated/merge_log.jsonl", merge_log_to_jsonl(project.integrated.merge_log)),
        )
    else:
        absent[GROUP_INTEGRATED] = "the project was never integrated"

    # 5. documented selection approach, including the team setup
    approach = {
        "workflow": project.selection_policy.workflow.value,
        "scale": {
            "kind": project.selection_policy.scale.kind.value,
            "lo": project.selection_policy.scale.lo,
            "hi": project.selection_policy.scale.hi,
            "neutral": project.selection_policy.scale.neutral,
        },
        "threshold": project.selection_policy.threshold,
        "aggregator": project.selection_policy.aggregator.value,
        "reviewer_weights": dict(project.selection_policy.reviewer_weights),
        "vote_exclusion_criteria": list(project.selection_policy.vote_exclusion_criteria),
        "team": [{"id": r.id, "role": r.role} for r in project.reviewers],
        "research_questions": list(project.research_questions),
    }
    groups[GROUP_APPROACH] = (
        write("approach/selection_approach.json", _json_text(approach)),
    )

    # 6. decided dataset plus statistics
    if decisions:
        # last recorded decision per paper wins, mirroring build_funnel
        effective = list({d.paper: d for d in decisions}.values())
    else:
        effective = [
            Decision(paper=r.id, state=Relevance.RELEVANT, decided_by=DecidedBy.AGGREGATE)
            for r in project.decided
        ]
    funnel = funnel_for_project(project, effective)
    by_state: Dict[str, int] = {}
    for d in effective:
        by_state[d.state.value] = by_state.get(d.state.value, 0) + 1
    statistics = {
        "integrated_records": len(project.integrated) if project.integrated else 0,
        "decided_records": len(project.decided),
        "decisions_by_state": by_state,
        "decision_log_present": bool(decisions),
        "funnel": funnel_json(funnel),
    }
    groups[GROUP_DECIDED] = (
        write("decided/decided.csv", dataset_to_csv(project.decided, classes)),
        write("decided/decided.bib", records_to_bibtex(project.decided)),
        write("decided/statistics.json", _json_text(statistics)),
        write("decided/funnel.txt", render_text(funnel)),
    )

    files = sorted(rel for parts in groups.values() for rel in parts)
    manifest = {
        "project": project.name,
        "revision": project.decided.revision,
        "baseline_revision": project.baseline_revision,
        "groups": {g: list(groups[g]) for g in sorted(groups)},
        "absent": absent,
        "files": {
            rel: {
                "sha256": _sha256_text(root / rel),
                "bytes": (root / rel).stat().st_size,
            }
            for rel in files
        },
    }
    write("manifest.json", _json_text(manifest))
    return HandoverBundle(root=str(root), groups=groups, absent=absent)
