"""Command-line front end.

Every command is a thin adapter: parse arguments, call the library, print
one JSON or table rendering of the result. Exit codes: 0 success, 1 violated
precondition, 2 I/O or parse problem, 3 data-integrity violation. The project
directory comes from --project, the LITSIEVE_PROJECT environment variable, or
the working directory, in that order.
"""

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Mapping, Optional, Sequence, Tuple

from .agreement import AgreementMethod, Weighting, build_report, matrix_for_method, report_to_json
from .analytics import (
    DEFAULT_STOPWORDS,
    CodingMap,
    TermScope,
    coauthor_graph,
    graph_edges_csv,
    graph_gml,
    graph_nodes_csv,
    term_frequency,
    term_frequency_csv,
)
from .errors import DataIntegrityError, LitsieveError, ParseError, PreconditionError, VoteError
from .ingest import (
    ReferenceDescriptor,
    SourceProfile,
    audit_completion,
    check_reference_set,
    parse_bibtex,
    parse_csv,
    stamp_ids,
)
from .merge import (
    DEFAULT_SIMILARITY_THRESHOLD,
    MergeStage,
    ResolutionPolicy,
    find_duplicates,
    import_event,
    integrate,
    resolve_duplicates,
)
from .model import CompletionFlag, Dataset, Project, Reviewer, StoredQuery, WorkflowKind, new_project
from .report import export_bundle, funnel_for_project, funnel_json, render_text
from .selection import (
    DecidedBy,
    SelectionRun,
    assign_overlapping_subsets,
    decisions_from_csv,
    votes_from_csv,
    votes_to_csv,
)
from .selection import finalize as finalize_selection
from .store import ProjectStore

ENV_PROJECT = "LITSIEVE_PROJECT"

_STAGES = {
    "per-database": MergeStage.PER_DATABASE,
    "cross-database": MergeStage.CROSS_DATABASE,
}


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as preconditions, not exits."""

    def error(self, message: str) -> None:
        raise PreconditionError(message)


def _split_csv(raw: Optional[str]) -> list[str]:
    if not raw:
        return []
    return [part.strip() for part in raw.split(",") if part.strip()]


def _project_root(args: argparse.Namespace) -> Path:
    if args.project:
        return Path(args.project)
    env = os.environ.get(ENV_PROJECT)
    return Path(env) if env else Path(".")


def _open_store(args: argparse.Namespace) -> ProjectStore:
    root = _project_root(args)
    store = ProjectStore(root)
    if not store.exists():
        raise PreconditionError(f"no project found at {root}; run init first")
    return store


def _build_run(store: ProjectStore, project: Project) -> SelectionRun:
    """Replay the stored vote and decision logs into a selection run."""
    if project.integrated is None:
        raise PreconditionError("the project has no integrated dataset to review yet")
    recorded = tuple(
        d
        for d in store.load_decisions()
        if d.decided_by in (DecidedBy.WORKSHOP, DecidedBy.MODERATOR)
    )
    return SelectionRun(
        papers=project.integrated.ids(),
        reviewers=project.reviewer_ids(),
        policy=project.selection_policy,
        votes=tuple(store.load_votes()),
        recorded=recorded,
        assignment=store.load_assignment(),
    )


def _review_dataset(project: Project) -> Tuple[Dataset, str]:
    """The most advanced dataset available for read-only analytics."""
    if project.decided is not None:
        return project.decided, "decided"
    if project.integrated is not None:
        return project.integrated, "integrated"
    raise PreconditionError("the project has no integrated dataset yet")


# --- output -----------------------------------------------------------------


def _render_plain(node: object, indent: int = 0) -> list[str]:
    pad = "  " * indent
    lines: list[str] = []
    if isinstance(node, Mapping):
        for key, value in node.items():
            if isinstance(value, (Mapping, list, tuple)):
                lines.append(f"{pad}{key}:")
                lines.extend(_render_plain(value, indent + 1))
            else:
                lines.append(f"{pad}{key}: {value}")
    elif isinstance(node, (list, tuple)):
        if not node:
            lines.append(f"{pad}(none)")
        elif all(not isinstance(item, (Mapping, list, tuple)) for item in node):
            lines.append(pad + ", ".join(str(item) for item in node))
        else:
            for item in node:
                lines.extend(_render_plain(item, indent))
    else:
        lines.append(f"{pad}{node}")
    return lines


def _emit(args: argparse.Namespace, doc: object, table: Optional[str]) -> None:
    if getattr(args, "format", "table") == "json":
        text = json.dumps(doc, indent=2, default=str) + "\n"
    else:
        text = table if table is not None else "\n".join(_render_plain(doc)) + "\n"
        if not text.endswith("\n"):
            text += "\n"
    sys.stdout.write(text)


def _fail(code: str, message: str, details: object) -> None:
    body = {"code": code, "message": message, "details": details if details is not None else {}}
    sys.stderr.write(json.dumps(body, default=str) + "\n")


# --- commands ---------------------------------------------------------------


def _cmd_init(args: argparse.Namespace):
    root = _project_root(args)
    store = ProjectStore(root)
    if store.exists():
        raise PreconditionError(f"a project already exists at {root}")
    project = new_project(args.name or root.name or "study", args.template)
    reviewers = [Reviewer(id=rid, token=f"token-{rid}") for rid in _split_csv(args.reviewers)]
    if args.moderator:
        reviewers.append(
            Reviewer(id=args.moderator, token=f"token-{args.moderator}", role="moderator")
        )
    if reviewers:
        project = project.with_fields(reviewers=tuple(reviewers))
    with store.lock():
        store.save(project)
    doc = {
        "created": str(root),
        "name": project.name,
        "template": args.template,
        "reviewers": [r.id for r in project.reviewers],
    }
    return doc, None


def _cmd_import(args: argparse.Namespace):
    store = _open_store(args)
    text = Path(args.file).read_text(encoding="utf-8")
    profile = None
    if args.profile:
        profile = SourceProfile.from_json(Path(args.profile).read_text(encoding="utf-8"))
    if profile is not None and profile.format == "csv":
        records, warnings = parse_csv(text, profile)
    elif Path(args.file).suffix.lower() == ".bib" or (profile and profile.format == "bibtex"):
        records, warnings = parse_bibtex(text)
    else:
        raise PreconditionError("delimited exports need a --profile describing their columns")
    database = args.database or (profile.database_name if profile else "")
    if not database:
        raise PreconditionError("no database name; pass --database or a profile that names one")

    with store.lock():
        project = store.load()
        existing = project.raw.get(database)
        start = len(existing) + 1 if existing is not None else 1
        stamped = tuple(stamp_ids(records, database, start=start))
        event = import_event(database, args.query, len(stamped))
        if existing is not None:
            dataset = existing.evolve(existing.records + stamped, event)
        else:
            dataset = Dataset(records=stamped, merge_log=(event,), revision=1)
        raw = dict(project.raw)
        raw[database] = dataset
        sources = project.sources
        if database not in sources:
            sources = sources + (database,)
        queries = project.queries
        if args.query_text:
            queries = queries + (StoredQuery(args.query, args.query_text, database=database),)
        project = project.with_fields(raw=raw, sources=sources, queries=queries)
        store.save(project)

    doc = {
        "database": database,
        "query": args.query,
        "imported": len(stamped),
        "ids": [stamped[0].id, stamped[-1].id] if stamped else [],
        "revision": dataset.revision,
        "warnings": list(warnings),
    }
    return doc, None


def _cmd_merge(args: argparse.Namespace):
    store = _open_store(args)
    stage = _STAGES[args.stage]
    with store.lock():
        project = store.load()
        if not project.raw:
            raise PreconditionError("nothing to merge; import result sets first")
        if stage is MergeStage.PER_DATABASE:
            raw = dict(project.raw)
            for db in sorted(raw):
                dataset = raw[db]
                _, event = integrate(((db, dataset),), MergeStage.PER_DATABASE)
                raw[db] = dataset.evolve(dataset.records, event)
            store.save(project.with_fields(raw=raw))
            doc = {
                "stage": args.stage,
                "databases": sorted(raw),
                "records": {db: len(raw[db]) for db in sorted(raw)},
            }
            return doc, None
        if project.integrated is not None:
            raise PreconditionError("the project already has an integrated dataset")
        parts = tuple((db, project.raw[db]) for db in sorted(project.raw))
        integrated, _ = integrate(parts, MergeStage.CROSS_DATABASE)
        store.save(project.with_fields(integrated=integrated))
    doc = {"stage": args.stage, "records": len(integrated), "revision": integrated.revision}
    return doc, None


def _dedupe_policy(args: argparse.Namespace) -> ResolutionPolicy:
    return ResolutionPolicy(
        source_priority=tuple(_split_csv(args.priority)),
        auto_resolve_extensions=args.auto_extensions,
    )


def _pair_json(pairs) -> list[dict]:
    return [{"a": p.a, "b": p.b, "kind": p.kind.value, "score": p.score} for p in pairs]


def _cmd_dedupe(args: argparse.Namespace):
    store = _open_store(args)
    stage = _STAGES[args.stage]
    policy = _dedupe_policy(args)

    if args.dry_run:
        project = store.load()
        listing = []
        if stage is MergeStage.PER_DATABASE:
            for db in sorted(project.raw):
                pairs = find_duplicates(project.raw[db], args.threshold)
                listing.append({"database": db, "pairs": _pair_json(pairs)})
        else:
            if project.integrated is None:
                raise PreconditionError("integrate the raw result sets before deduplicating")
            pairs = find_duplicates(project.integrated, args.threshold)
            listing.append({"database": "integrated", "pairs": _pair_json(pairs)})
        doc = {"stage": args.stage, "dry_run": True, "removed": 0, "databases": listing}
        return doc, None

    with store.lock():
        project = store.load()
        removed_total = 0
        listing = []
        if stage is MergeStage.PER_DATABASE:
            raw = dict(project.raw)
            for db in sorted(raw):
                pairs = find_duplicates(raw[db], args.threshold)
                deduped, event = resolve_duplicates(
                    raw[db], pairs, policy, stage=MergeStage.PER_DATABASE, dataset_name=db
                )
                raw[db] = deduped
                removed_total += event.duplicates_removed
                listing.append(
                    {"database": db, "removed": event.duplicates_removed, "revision": deduped.revision}
                )
            store.save(project.with_fields(raw=raw))
            doc = {"stage": args.stage, "dry_run": False, "removed": removed_total, "databases": listing}
            return doc, None
        if project.integrated is None:
            raise PreconditionError("integrate the raw result sets before deduplicating")
        pairs = find_duplicates(project.integrated, args.threshold)
        deduped, event = resolve_duplicates(
            project.integrated, pairs, policy, stage=MergeStage.CROSS_DATABASE, dataset_name="integrated"
        )
        store.save(project.with_fields(integrated=deduped))
    doc = {
        "stage": args.stage,
        "dry_run": False,
        "removed": event.duplicates_removed,
        "revision": deduped.revision,
    }
    return doc, None


def _cmd_audit(args: argparse.Namespace):
    store = _open_store(args)
    project = store.load()
    if args.dataset == "raw":
        if not args.database:
            raise PreconditionError("auditing a raw slot needs --database")
        dataset = project.raw.get(args.database)
        label = f"raw/{args.database}"
    elif args.dataset == "decided":
        dataset, label = project.decided, "decided"
    else:
        dataset, label = project.integrated, "integrated"
    if dataset is None:
        raise PreconditionError(f"the project has no {args.dataset} dataset")
    audit = audit_completion(dataset)
    doc = {
        "dataset": label,
        "records": len(dataset),
        "counts": {flag.value: audit.counts[flag] for flag in CompletionFlag},
        "ids": {flag.value: list(audit.ids[flag]) for flag in CompletionFlag},
    }
    return doc, None


def _cmd_check_refs(args: argparse.Namespace):
    store = _open_store(args)
    project = store.load()
    if project.integrated is None:
        raise PreconditionError("reference checks run against the integrated dataset")
    data = json.loads(Path(args.file).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise PreconditionError("the reference file must hold a JSON list of {title, year} objects")
    refs = tuple(ReferenceDescriptor(title=item["title"], year=item.get("year")) for item in data)
    check = check_reference_set(project.integrated, refs)
    doc = {
        "all_found": check.all_found,
        "found": [{"title": d.title, "year": d.year, "id": rid} for d, rid in check.found],
        "missing": [{"title": d.title, "year": d.year} for d in check.missing],
    }
    return doc, None


def _cmd_assign(args: argparse.Namespace):
    store = _open_store(args)
    with store.lock():
        project = store.load()
        if project.integrated is None:
            raise PreconditionError("assignments need an integrated dataset")
        reviewer_ids = [r.id for r in project.reviewers if r.role == "reviewer"]
        assignment = assign_overlapping_subsets(
            project.integrated.ids(), reviewer_ids, args.coverage, args.seed
        )
        store.save_assignment(assignment)
        if args.workflow:
            policy = replace(project.selection_policy, workflow=WorkflowKind(args.workflow))
            project = project.with_fields(selection_policy=policy)
            store.save(project)
    doc = {
        "papers": len(assignment),
        "reviewers": reviewer_ids,
        "coverage": args.coverage,
        "seed": args.seed,
        "workflow": project.selection_policy.workflow.value,
    }
    return doc, None


def _cmd_votes_import(args: argparse.Namespace):
    store = _open_store(args)
    parsed = votes_from_csv(Path(args.file).read_text(encoding="utf-8"))
    with store.lock():
        project = store.load()
        run = _build_run(store, project)
        before = len(run.votes)
        for vote in parsed:
            run = run.cast(vote)
        fresh = run.votes[before:]
        store.append_votes(fresh)
    doc = {"imported": len(fresh), "votes_total": len(run.votes)}
    return doc, None


def _cmd_votes_export(args: argparse.Namespace):
    store = _open_store(args)
    votes = store.load_votes()
    Path(args.file).write_text(votes_to_csv(votes), encoding="utf-8")
    return {"exported": len(votes), "file": str(args.file)}, None


def _cmd_decide(args: argparse.Namespace):
    store = _open_store(args)
    parsed = decisions_from_csv(Path(args.file).read_text(encoding="utf-8"))
    with store.lock():
        project = store.load()
        catalog = set(project.criteria.ids())
        run = _build_run(store, project)
        before = len(run.recorded)
        for decision in parsed:
            unknown = sorted(set(decision.criteria_applied) - catalog)
            if unknown:
                raise VoteError(f"unknown criteria ids: {unknown}")
            run = run.record_decision(
                decision.paper,
                decision.state,
                decision.criteria_applied,
                decision.decided_by,
            )
        fresh = run.recorded[before:]
        store.append_decisions(fresh)
    doc = {"recorded": len(fresh)}
    return doc, None


def _cmd_finalize(args: argparse.Namespace):
    store = _open_store(args)
    with store.lock():
        project = store.load()
        if project.decided is not None:
            raise PreconditionError("the project is already finalized")
        run = _build_run(store, project)
        decided, ordered = finalize_selection(project.integrated, run.decisions())
        store.append_decisions(ordered)
        project = project.with_fields(decided=decided, baseline_revision=decided.revision)
        store.save(project)
    doc = {
        "decided_records": len(decided),
        "decisions": len(ordered),
        "revision": decided.revision,
    }
    return doc, None


def _cmd_kappa(args: argparse.Namespace):
    store = _open_store(args)
    project = store.load()
    if project.integrated is None:
        raise PreconditionError("agreement needs an integrated dataset and votes")
    method = AgreementMethod(args.method)
    matrix = matrix_for_method(
        project.selection_policy,
        project.reviewer_ids(),
        project.integrated.ids(),
        store.load_votes(),
        method,
    )
    report = build_report(matrix, method, Weighting(args.weighting))
    return report_to_json(report), None


def _cmd_report(args: argparse.Namespace):
    store = _open_store(args)
    project = store.load()
    if project.integrated is not None:
        decisions = tuple(_build_run(store, project).decisions().values())
    else:
        decisions = tuple(store.load_decisions())
    funnel = funnel_for_project(project, decisions)
    text = render_text(funnel)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    return funnel_json(funnel), text


def _cmd_export(args: argparse.Namespace):
    store = _open_store(args)
    project = store.load()
    bundle = export_bundle(project, args.out_dir, tuple(store.load_decisions()))
    doc = {
        "root": bundle.root,
        "groups": {group: list(files) for group, files in bundle.groups.items()},
        "absent": dict(bundle.absent),
        "manifest": str(Path(bundle.root) / bundle.manifest_path),
    }
    return doc, None


def _cmd_wordfreq(args: argparse.Namespace):
    store = _open_store(args)
    project = store.load()
    dataset, label = _review_dataset(project)
    scope = TermScope(args.scope)
    if args.stopwords:
        stopwords: Sequence[str] = [
            line.strip()
            for line in Path(args.stopwords).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
    elif scope is TermScope.ABSTRACTS:
        stopwords = sorted(DEFAULT_STOPWORDS)
    else:
        stopwords = ()
    coding = None
    if args.coding:
        coding = CodingMap(json.loads(Path(args.coding).read_text(encoding="utf-8")))
    tf = term_frequency(dataset, scope, coding=coding, stopwords=stopwords)
    rows = sorted(tf.counts.items(), key=lambda pair: (-pair[1], pair[0]))
    if args.top is not None:
        rows = rows[: args.top]
    doc = {
        "dataset": label,
        "scope": scope.value,
        "terms": [{"term": term, "count": count} for term, count in rows],
    }
    table = term_frequency_csv(tf)
    if args.top is not None:
        lines = table.splitlines()
        table = "\n".join(lines[: 1 + args.top]) + "\n"
    return doc, table


def _cmd_network(args: argparse.Namespace):
    store = _open_store(args)
    project = store.load()
    dataset, label = _review_dataset(project)
    graph = coauthor_graph(dataset)
    out_dir = Path(args.out_dir) if args.out_dir else store.root / "analytics"
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "nodes.csv").write_text(graph_nodes_csv(graph), encoding="utf-8")
    (out_dir / "edges.csv").write_text(graph_edges_csv(graph), encoding="utf-8")
    (out_dir / "graph.gml").write_text(graph_gml(graph), encoding="utf-8")
    doc = {
        "dataset": label,
        "out_dir": str(out_dir),
        "nodes": len(graph.nodes),
        "edges": len(graph.edges),
        "files": ["nodes.csv", "edges.csv", "graph.gml"],
    }
    return doc, None


def _cmd_serve(args: argparse.Namespace):  # pragma: no cover - blocks on uvicorn
    store = _open_store(args)
    from .service import serve as run_server

    with store.lock():
        run_server(store, host=args.host, port=args.port)
    return {"stopped": True}, None


# --- parser wiring ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--project", help="project directory (default: $LITSIEVE_PROJECT or .)")
    common.add_argument("--format", choices=("json", "table"), default="table")

    parser = _Parser(prog="litsieve", description="Stepwise literature study pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init", parents=[common], help="create a project directory")
    p.add_argument("--name", default="", help="project name (default: directory name)")
    p.add_argument("--template", choices=("standard", "blank"), default="standard")
    p.add_argument("--reviewers", default="", help="comma-separated reviewer ids")
    p.add_argument("--moderator", default="", help="moderator id")
    p.set_defaults(handler=_cmd_init)

    p = sub.add_parser("import", parents=[common], help="import one database export file")
    p.add_argument("file")
    p.add_argument("--database", default="", help="database name (defaults to the profile's)")
    p.add_argument("--query", required=True, help="search query label, e.g. S1")
    p.add_argument("--query-text", default="", help="full query string to store")
    p.add_argument("--profile", default="", help="JSON source profile for delimited exports")
    p.set_defaults(handler=_cmd_import)

    p = sub.add_parser("merge", parents=[common], help="consolidate result sets stepwise")
    p.add_argument("--stage", choices=sorted(_STAGES), required=True)
    p.set_defaults(handler=_cmd_merge)

    p = sub.add_parser("dedupe", parents=[common], help="find and resolve duplicates")
    p.add_argument("--stage", choices=sorted(_STAGES), required=True)
    p.add_argument("--threshold", type=float, default=DEFAULT_SIMILARITY_THRESHOLD)
    p.add_argument("--dry-run", action="store_true", help="list pairs without removing anything")
    p.add_argument("--auto-extensions", action="store_true",
                   help="also resolve extension candidates (journal over conference)")
    p.add_argument("--priority", default="", help="comma-separated database priority order")
    p.set_defaults(handler=_cmd_dedupe)

    p = sub.add_parser("audit", parents=[common], help="list records with incomplete fields")
    p.add_argument("--dataset", choices=("integrated", "decided", "raw"), default="integrated")
    p.add_argument("--database", default="", help="raw slot to audit (with --dataset raw)")
    p.set_defaults(handler=_cmd_audit)

    p = sub.add_parser("check-refs", parents=[common],
                       help="verify known reference publications were found")
    p.add_argument("file", help="JSON list of {title, year} objects")
    p.set_defaults(handler=_cmd_check_refs)

    p = sub.add_parser("assign", parents=[common], help="assign papers to reviewer subsets")
    p.add_argument("--coverage", type=int, required=True, help="reviewers per paper")
    p.add_argument("--seed", type=int, required=True,
                   help="RNG seed; required so assignments are reproducible")
    p.add_argument("--workflow", choices=[w.value for w in WorkflowKind], default="")
    p.set_defaults(handler=_cmd_assign)

    p = sub.add_parser("votes", help="import or export the vote log")
    votes_sub = p.add_subparsers(dest="action", required=True)
    v = votes_sub.add_parser("import", parents=[common], help="append votes from a CSV file")
    v.add_argument("file")
    v.set_defaults(handler=_cmd_votes_import)
    v = votes_sub.add_parser("export", parents=[common], help="write the vote log as CSV")
    v.add_argument("file")
    v.set_defaults(handler=_cmd_votes_export)

    p = sub.add_parser("decide", parents=[common],
                       help="record workshop or moderator decisions from a CSV file")
    p.add_argument("file")
    p.set_defaults(handler=_cmd_decide)

    p = sub.add_parser("finalize", parents=[common],
                       help="cut the decided baseline; fails while papers are open")
    p.set_defaults(handler=_cmd_finalize)

    p = sub.add_parser("kappa", parents=[common], help="inter-rater agreement statistics")
    p.add_argument("--method", choices=[m.value for m in AgreementMethod],
                   default=AgreementMethod.COHEN_KAPPA.value)
    p.add_argument("--weighting", choices=[w.value for w in Weighting],
                   default=Weighting.LINEAR.value)
    p.set_defaults(handler=_cmd_kappa)

    p = sub.add_parser("report", parents=[common], help="search and selection funnel")
    p.add_argument("--out", default="", help="also write the text rendering to this file")
    p.set_defaults(handler=_cmd_report)

    p = sub.add_parser("export", parents=[common], help="write the handover bundle")
    p.add_argument("out_dir")
    p.set_defaults(handler=_cmd_export)

    p = sub.add_parser("wordfreq", parents=[common], help="term frequencies for scoping checks")
    p.add_argument("--scope", choices=[s.value for s in TermScope], default=TermScope.KEYWORDS.value)
    p.add_argument("--stopwords", default="", help="file with one stopword per line")
    p.add_argument("--coding", default="", help="JSON file mapping surface terms to codes")
    p.add_argument("--top", type=int, default=None, help="keep only the N most frequent terms")
    p.set_defaults(handler=_cmd_wordfreq)

    p = sub.add_parser("network", parents=[common], help="coauthor network exports")
    p.add_argument("--out-dir", default="", help="output directory (default: <project>/analytics)")
    p.set_defaults(handler=_cmd_network)

    p = sub.add_parser("serve", parents=[common], help="run the review service on localhost")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(handler=_cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(list(argv) if argv is not None else None)
        doc, table = args.handler(args)
        _emit(args, doc, table)
        return 0
    except SystemExit as exc:  # argparse --help
        return exc.code if isinstance(exc.code, int) else 0
    except ParseError as exc:
        _fail(exc.code, exc.message, exc.details)
        return 2
    except DataIntegrityError as exc:
        _fail(exc.code, exc.message, exc.details)
        return 3
    except LitsieveError as exc:
        _fail(exc.code, exc.message, exc.details)
        return 1
    except (ValueError, KeyError) as exc:
        _fail("parse", str(exc), None)
        return 2
    except OSError as exc:
        _fail("io", str(exc), None)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
