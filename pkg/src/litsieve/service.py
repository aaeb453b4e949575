"""HTTP facade for collaborative record screening.

One process serves one stored project on localhost. Reviewers identify
themselves with the static bearer token from the project configuration;
every write carries the dataset revision it was based on and is rejected
with a conflict when the project has moved on. All state changes append
to the vote and decision logs, so any process over the same directory
replays to the same state. GET endpoints never write.

Errors are uniform JSON objects: {"code", "message", "details"}.
"""

from __future__ import annotations

import threading
from typing import Any, Dict, List, Mapping, Optional

from fastapi import Body, Depends, FastAPI, Header, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .agreement import (
    AgreementMethod,
    Weighting,
    build_report,
    matrix_for_method,
    report_to_json,
)
from .errors import (
    LitsieveError,
    PreconditionError,
    StaleRevisionError,
    UnknownReviewerError,
    VoteError,
)
from .model import Record, Reviewer, WorkflowKind, database_of_id
from .report import funnel_for_project, funnel_json, render_text
from .selection import DecidedBy, Decision, Relevance, SelectionRun, Vote
from .store import ProjectStore, decision_to_json, vote_to_json

# HTTP status for each error code; anything unlisted is a client error.
_STATUS_BY_CODE = {
    "unknown_reviewer": 401,
    "stale_revision": 409,
    "precondition": 409,
    "vote": 400,
    "parse": 400,
    "profile": 400,
    "data_integrity": 500,
}

_PAGE_SIZE_LIMIT = 500


def _error_json(status: int, code: str, message: str, details: object = None) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "details": details if details is not None else {}},
    )


class ServiceState:
    """Mutable in-process view of one stored project.

    The store is the source of truth; this object caches the loaded
    project and logs and serializes writers with a process-local mutex.
    """

    def __init__(self, store: ProjectStore) -> None:
        self.store = store
        self.mutex = threading.Lock()
        self.reload()

    def reload(self) -> None:
        self.project = self.store.load()
        self.votes: List[Vote] = list(self.store.load_votes())
        self.decision_log: List[Decision] = list(self.store.load_decisions())
        self.assignment = self.store.load_assignment()

    @property
    def revision(self) -> int:
        d = self.project.integrated
        return d.revision if d is not None else 0

    def recorded(self) -> tuple:
        """Workshop and moderator decisions; replayed states are recomputed."""
        return tuple(
            d
            for d in self.decision_log
            if d.decided_by in (DecidedBy.WORKSHOP, DecidedBy.MODERATOR)
        )

    def run(self) -> SelectionRun:
        if self.project.integrated is None:
            raise PreconditionError("the project has no integrated dataset to review yet")
        return SelectionRun(
            papers=self.project.integrated.ids(),
            reviewers=self.project.reviewer_ids(),
            policy=self.project.selection_policy,
            votes=tuple(self.votes),
            recorded=self.recorded(),
            assignment=self.assignment,
        )


def _record_summary(record: Record, decision: Optional[Decision]) -> Dict[str, Any]:
    return {
        "no": record.id,
        "db_no": record.db_no,
        "title": record.title,
        "authors": [a.raw for a in record.authors],
        "year": record.year,
        "source_venue": record.venue,
        "publication_vehicle": record.vehicle.value,
        "database": database_of_id(record.id),
        "state": decision.state.value if decision else Relevance.TO_DECIDE.value,
        "decided_by": (
            decision.decided_by.value
            if decision and decision.state is not Relevance.TO_DECIDE
            else None
        ),
    }


def _record_detail(
    record: Record, decision: Optional[Decision], own_votes: List[Vote]
) -> Dict[str, Any]:
    body = _record_summary(record, decision)
    body.update(
        {
            "keywords": list(record.keywords),
            "abstract": record.abstract,
            "publisher_database": record.publisher_db,
            "general_comments": record.comments,
            "metadata": dict(record.metadata),
            "full_text_available": record.full_text_available,
            "completion_flags": sorted(f.value for f in record.completion_flags),
            "criteria_applied": list(decision.criteria_applied) if decision else [],
            "your_vote": own_votes[-1].value if own_votes else None,
            "your_round": own_votes[-1].round if own_votes else None,
        }
    )
    return body


def create_app(store: ProjectStore) -> FastAPI:
    """Build the application over one project directory."""
    state = ServiceState(store)
    app = FastAPI(title="litsieve review service", docs_url=None, redoc_url=None)
    app.state.litsieve = state

    # -- plumbing ---------------------------------------------------------

    @app.exception_handler(LitsieveError)
    async def _domain_error(request: Request, exc: LitsieveError) -> JSONResponse:
        status = _STATUS_BY_CODE.get(exc.code, 400)
        return _error_json(status, exc.code, exc.message, exc.details)

    @app.exception_handler(RequestValidationError)
    async def _malformed(request: Request, exc: RequestValidationError) -> JSONResponse:
        return _error_json(400, "precondition", "malformed request", {})

    def current_reviewer(authorization: Optional[str] = Header(default=None)) -> Reviewer:
        if not authorization or not authorization.startswith("Bearer "):
            raise UnknownReviewerError("send a reviewer token as 'Authorization: Bearer <token>'")
        token = authorization[len("Bearer ") :].strip()
        for reviewer in state.project.reviewers:
            if reviewer.token and reviewer.token == token:
                return reviewer
        raise UnknownReviewerError("no reviewer in this project matches the token")

    def _require_int(payload: Mapping[str, Any], key: str) -> int:
        value = payload.get(key)
        if not isinstance(value, int) or isinstance(value, bool):
            raise VoteError(f"the request body needs an integer '{key}' field")
        return value

    def _require_str(payload: Mapping[str, Any], key: str) -> str:
        value = payload.get(key)
        if not isinstance(value, str) or not value:
            raise VoteError(f"the request body needs a non-empty string '{key}' field")
        return value

    def _check_revision(payload: Mapping[str, Any]) -> None:
        got = _require_int(payload, "revision")
        if got != state.revision:
            raise StaleRevisionError(
                f"the dataset is at revision {state.revision} now; "
                "refresh your view and resubmit",
                details={"expected": state.revision, "got": got},
            )

    # -- read endpoints ----------------------------------------------------

    @app.get("/project")
    def project_summary(reviewer: Reviewer = Depends(current_reviewer)) -> Dict[str, Any]:
        project = state.project
        policy = project.selection_policy
        counts: Dict[str, Any] = {
            "papers": len(project.integrated) if project.integrated is not None else 0,
            "votes": len(state.votes),
            "decided_records": len(project.decided) if project.decided is not None else None,
        }
        counts["undecided"] = len(state.run().undecided()) if project.integrated else 0
        return {
            "name": project.name,
            "revision": state.revision,
            "baseline_revision": project.baseline_revision,
            "workflow": policy.workflow.value,
            "scale": {
                "kind": policy.scale.kind.value,
                "lo": policy.scale.lo,
                "hi": policy.scale.hi,
                "neutral": policy.scale.neutral,
            },
            "threshold": policy.threshold,
            "aggregator": policy.aggregator.value,
            "vote_exclusion_criteria": list(policy.vote_exclusion_criteria),
            "research_questions": list(project.research_questions),
            "sources": list(project.sources),
            "criteria": [
                {"id": c.id, "kind": c.kind.value, "text": c.text} for c in project.criteria
            ],
            "reviewers": [{"id": r.id, "role": r.role} for r in project.reviewers],
            "you": {"id": reviewer.id, "role": reviewer.role},
            "counts": counts,
        }

    @app.get("/records")
    def list_records(
        state_filter: Optional[str] = Query(default=None, alias="state"),
        page: int = Query(default=1),
        page_size: int = Query(default=50),
        reviewer: Reviewer = Depends(current_reviewer),
    ):
        if page < 1:
            return _error_json(400, "precondition", "page starts at 1")
        if page_size < 1 or page_size > _PAGE_SIZE_LIMIT:
            return _error_json(
                400, "precondition", f"page_size must be between 1 and {_PAGE_SIZE_LIMIT}"
            )
        wanted: Optional[Relevance] = None
        if state_filter is not None:
            try:
                wanted = Relevance(state_filter)
            except ValueError:
                choices = ", ".join(s.value for s in Relevance)
                return _error_json(400, "precondition", f"state must be one of: {choices}")

        dataset = state.project.integrated
        if dataset is None:
            return {"total": 0, "page": page, "page_size": page_size, "pages": 0, "records": []}
        decisions = state.run().decisions()
        rows = [
            _record_summary(r, decisions.get(r.id))
            for r in dataset.records
            if wanted is None or decisions[r.id].state is wanted
        ]
        total = len(rows)
        pages = (total + page_size - 1) // page_size
        start = (page - 1) * page_size
        return {
            "total": total,
            "page": page,
            "page_size": page_size,
            "pages": pages,
            "records": rows[start : start + page_size],
        }

    @app.get("/records/{record_id}")
    def record_detail(record_id: str, reviewer: Reviewer = Depends(current_reviewer)):
        dataset = state.project.integrated
        record = dataset.get(record_id) if dataset is not None else None
        if record is None:
            return _error_json(404, "precondition", f"unknown paper {record_id!r}")
        decision = state.run().decisions().get(record_id)
        own = [v for v in state.votes if v.reviewer == reviewer.id and v.paper == record_id]
        body: Dict[str, Any] = {
            "record": _record_detail(record, decision, own),
            "criteria": [
                {"id": c.id, "kind": c.kind.value, "text": c.text}
                for c in state.project.criteria
            ],
        }
        # Reviewers stay blind to each other's votes while screening; the
        # workshop moderator gets every vote on the paper, side by side.
        if reviewer.role == "moderator":
            body["votes"] = [
                vote_to_json(v) for v in state.votes if v.paper == record_id
            ]
        return body

    @app.get("/worklist")
    def worklist(reviewer: Reviewer = Depends(current_reviewer)) -> Dict[str, Any]:
        run = state.run()
        papers = run.worklist(reviewer.id) if reviewer.id in run.reviewers else ()
        return {
            "reviewer": reviewer.id,
            "round": run.required_round(reviewer.id),
            "papers": list(papers),
        }

    @app.get("/agreement")
    def agreement(
        method: str = Query(default=AgreementMethod.COHEN_KAPPA.value),
        weighting: str = Query(default=Weighting.LINEAR.value),
        reviewer: Reviewer = Depends(current_reviewer),
    ):
        try:
            chosen = AgreementMethod(method)
            weights = Weighting(weighting)
        except ValueError:
            return _error_json(400, "precondition", f"unknown agreement method {method!r}")
        run = state.run()
        try:
            matrix = matrix_for_method(
                state.project.selection_policy, run.reviewers, run.papers, state.votes, chosen
            )
            report = build_report(matrix, chosen, weights)
        except (PreconditionError, VoteError) as exc:
            return _error_json(400, exc.code, exc.message, exc.details)
        return report_to_json(report)

    @app.get("/funnel")
    def funnel(reviewer: Reviewer = Depends(current_reviewer)) -> Dict[str, Any]:
        if state.project.integrated is not None:
            decisions = state.run().decisions().values()
        else:
            decisions = state.decision_log
        report = funnel_for_project(state.project, decisions)
        return {"funnel": funnel_json(report), "text": render_text(report)}

    # -- write endpoints ---------------------------------------------------

    @app.post("/votes")
    def submit_vote(
        payload: Dict[str, Any] = Body(...),
        reviewer: Reviewer = Depends(current_reviewer),
    ):
        with state.mutex:
            run = state.run()
            paper = _require_str(payload, "paper")
            if paper not in run.papers:
                return _error_json(404, "precondition", f"unknown paper {paper!r}")
            _check_revision(payload)
            value = _require_int(payload, "value")
            round_no = (
                _require_int(payload, "round")
                if "round" in payload
                else run.required_round(reviewer.id)
            )
            for v in state.votes:
                if (v.reviewer, v.paper, v.round) == (reviewer.id, paper, round_no):
                    return _error_json(
                        409,
                        "vote",
                        f"{reviewer.id} already voted {paper} in round {round_no}; "
                        "votes are never overwritten",
                    )
            new_run = run.cast(Vote(reviewer.id, paper, value, round_no))
            stamped = new_run.votes[-1]
            state.store.append_votes([stamped])
            state.votes.append(stamped)
        return {"accepted": True, "vote": vote_to_json(stamped), "revision": state.revision}

    @app.post("/decisions")
    def submit_decision(
        payload: Dict[str, Any] = Body(...),
        reviewer: Reviewer = Depends(current_reviewer),
    ):
        workflow = state.project.selection_policy.workflow
        if reviewer.role == "moderator":
            decided_by = DecidedBy.MODERATOR
        elif (
            workflow is WorkflowKind.TWO_REVIEWER_WORKSHOP
            and reviewer.id in state.project.reviewer_ids()[:2]
        ):
            decided_by = DecidedBy.WORKSHOP
        else:
            return _error_json(
                403,
                "precondition",
                "only the moderator (or the two workshop reviewers) may record decisions",
            )
        with state.mutex:
            run = state.run()
            paper = _require_str(payload, "paper")
            if paper not in run.papers:
                return _error_json(404, "precondition", f"unknown paper {paper!r}")
            _check_revision(payload)
            try:
                wanted = Relevance(_require_str(payload, "state"))
            except ValueError:
                raise VoteError("state must be 'relevant' or 'irrelevant'")
            criteria = payload.get("criteria", [])
            if not isinstance(criteria, list) or any(not isinstance(c, str) for c in criteria):
                raise VoteError("criteria must be a list of criterion ids")
            known = set(state.project.criteria.ids())
            unknown = sorted(set(criteria) - known)
            if unknown:
                raise VoteError(f"unknown criteria: {', '.join(unknown)}")
            new_run = run.record_decision(paper, wanted, tuple(criteria), decided_by)
            decision = new_run.recorded[-1]
            state.store.append_decisions([decision])
            state.decision_log.append(decision)
        return {"decision": decision_to_json(decision), "revision": state.revision}

    return app


def serve(store: ProjectStore, host: str = "127.0.0.1", port: int = 8000) -> None:
    """Run the service until interrupted."""  # pragma: no cover - thin wrapper
    import uvicorn

    uvicorn.run(create_app(store), host=host, port=port, log_level="warning")
