"""HTTP contract tests for the review service.

The service is a thin facade over the stored project: static bearer
tokens identify reviewers, every write carries the dataset revision it
was based on, and all state changes land in the append-only logs so a
fresh process reaches the same state. Expected agreement numbers are
hand-computed from the vote plan below, not taken from the library.
"""

import json

import pytest
from fastapi.testclient import TestClient

from litsieve.model import (
    AuthorName,
    Criterion,
    CriterionKind,
    CriterionSet,
    Dataset,
    MergeEvent,
    MergeKind,
    MergeStage,
    Project,
    Record,
    ResolutionNote,
    Reviewer,
    Scale,
    SelectionPolicy,
    Vehicle,
    WorkflowKind,
)
from litsieve.service import create_app
from litsieve.store import ProjectStore

REV = 3
PAPERS = tuple(f"DB-{i:04d}" for i in range(1, 7))

ALICE = {"Authorization": "Bearer tok-a"}
BOB = {"Authorization": "Bearer tok-b"}
CAROL = {"Authorization": "Bearer tok-c"}
DANA = {"Authorization": "Bearer tok-d"}

# The vote plan: agreement on papers 1-4, disagreement on papers 5 and 6.
ALICE_VOTES = {1: 1, 2: 1, 3: 0, 4: 0, 5: 1, 6: 0}
BOB_VOTES = {1: 1, 2: 1, 3: 0, 4: 0, 5: 0, 6: 1}
# Hand-computed from the plan: p_o = 4/6, marginals 3/6 each side,
# p_e = 0.5, kappa = (2/3 - 1/2) / (1 - 1/2) = 1/3.
EXPECTED_KAPPA = 1.0 / 3.0
EXPECTED_PERCENT = 4.0 / 6.0


def _records():
    out = []
    for i in range(1, 7):
        out.append(
            Record(
                id=f"DB-{i:04d}",
                db_no=str(i),
                title=f"Study number {i}",
                authors=(AuthorName(given="A.", family=f"Author{i}", raw=f"Author{i}, A."),),
                keywords=("testing",),
                abstract="An abstract.",
                year=2014 + i,
                publisher_db="DB",
                venue="Journal of Tests",
                vehicle=Vehicle.JOURNAL,
            )
        )
    return tuple(out)


def _merge_log():
    # 8 hits -> 1 per-database duplicate -> integrate 7 -> 1 cross duplicate -> 6.
    return (
        MergeEvent(MergeStage.PER_DATABASE, MergeKind.IMPORT, (("DB", 8),), label="S1"),
        MergeEvent(
            MergeStage.PER_DATABASE,
            MergeKind.DEDUP,
            (("DB", 8),),
            duplicates_removed=1,
            resolution_notes=(ResolutionNote("DB-0001", "DB-0099", "same doi"),),
        ),
        MergeEvent(MergeStage.CROSS_DATABASE, MergeKind.INTEGRATE, (("DB", 7),)),
        MergeEvent(
            MergeStage.CROSS_DATABASE,
            MergeKind.DEDUP,
            (("integrated", 7),),
            duplicates_removed=1,
            resolution_notes=(ResolutionNote("DB-0002", "DB-0098", "same title and year"),),
        ),
    )


def _project(scale=None):
    policy = SelectionPolicy(
        scale=scale if scale is not None else Scale.binary(),
        threshold=1.0,
        workflow=WorkflowKind.TWO_PLUS_ONE,
        vote_exclusion_criteria=("E1",),
    )
    return Project(
        name="svc-study",
        research_questions=("RQ1: what is tested?",),
        criteria=CriterionSet(
            (
                Criterion("I1", CriterionKind.INCLUSION, "peer reviewed venue"),
                Criterion("E1", CriterionKind.EXCLUSION, "not written in English"),
                Criterion("E2", CriterionKind.EXCLUSION, "no full text available"),
            )
        ),
        sources=("DB",),
        selection_policy=policy,
        reviewers=(
            Reviewer("alice", token="tok-a"),
            Reviewer("bob", token="tok-b"),
            Reviewer("carol", token="tok-c"),
            Reviewer("dana", token="tok-d", role="moderator"),
        ),
        integrated=Dataset(records=_records(), merge_log=_merge_log(), revision=REV),
    )


@pytest.fixture()
def store(tmp_path):
    s = ProjectStore(tmp_path / "proj")
    s.save(_project())
    return s


@pytest.fixture()
def client(store):
    return TestClient(create_app(store))


def _vote(client, headers, paper, value, round_no=None, revision=REV):
    body = {"paper": paper, "value": value, "revision": revision}
    if round_no is not None:
        body["round"] = round_no
    return client.post("/votes", json=body, headers=headers)


def _cast_initial(client):
    """Both initial reviewers vote every paper per the plan."""
    for i, value in ALICE_VOTES.items():
        assert _vote(client, ALICE, f"DB-{i:04d}", value).status_code == 200
    for i, value in BOB_VOTES.items():
        assert _vote(client, BOB, f"DB-{i:04d}", value).status_code == 200


def _error(resp):
    body = resp.json()
    assert set(body) == {"code", "message", "details"}
    return body


class TestAuth:
    def test_missing_token_is_unauthorized(self, client):
        resp = client.get("/project")
        assert resp.status_code == 401
        assert _error(resp)["code"] == "unknown_reviewer"

    def test_wrong_token_is_unauthorized(self, client):
        resp = client.get("/project", headers={"Authorization": "Bearer nope"})
        assert resp.status_code == 401
        assert _error(resp)["code"] == "unknown_reviewer"

    def test_non_bearer_scheme_is_unauthorized(self, client):
        resp = client.get("/project", headers={"Authorization": "Basic tok-a"})
        assert resp.status_code == 401

    def test_every_endpoint_requires_a_token(self, client):
        for method, path in [
            ("get", "/records"),
            ("get", "/records/DB-0001"),
            ("get", "/worklist"),
            ("get", "/agreement"),
            ("get", "/funnel"),
            ("post", "/votes"),
            ("post", "/decisions"),
        ]:
            if method == "post":
                resp = client.post(path, json={})
            else:
                resp = client.get(path)
            assert resp.status_code == 401, path


class TestProject:
    def test_summary_fields(self, client):
        body = client.get("/project", headers=ALICE).json()
        assert body["name"] == "svc-study"
        assert body["revision"] == REV
        assert body["workflow"] == "two_plus_one"
        assert body["threshold"] == 1.0
        assert body["scale"]["lo"] == 0 and body["scale"]["hi"] == 1
        assert body["you"] == {"id": "alice", "role": "reviewer"}
        assert {c["id"] for c in body["criteria"]} == {"I1", "E1", "E2"}
        assert body["counts"]["papers"] == 6
        assert body["counts"]["undecided"] == 6

    def test_tokens_never_leave_the_server(self, client):
        text = client.get("/project", headers=DANA).text
        for token in ("tok-a", "tok-b", "tok-c", "tok-d"):
            assert token not in text
        roles = {r["id"]: r["role"] for r in client.get("/project", headers=DANA).json()["reviewers"]}
        assert roles == {"alice": "reviewer", "bob": "reviewer", "carol": "reviewer", "dana": "moderator"}


class TestRecords:
    def test_paging(self, client):
        page1 = client.get("/records", params={"page": 1, "page_size": 4}, headers=ALICE).json()
        page2 = client.get("/records", params={"page": 2, "page_size": 4}, headers=ALICE).json()
        assert page1["total"] == 6 and page1["pages"] == 2
        assert [r["no"] for r in page1["records"]] == list(PAPERS[:4])
        assert [r["no"] for r in page2["records"]] == list(PAPERS[4:])

    def test_bad_page_rejected(self, client):
        assert client.get("/records", params={"page": 0}, headers=ALICE).status_code == 400
        assert client.get("/records", params={"page_size": 0}, headers=ALICE).status_code == 400
        assert client.get("/records", params={"page_size": 9999}, headers=ALICE).status_code == 400

    def test_state_filter(self, client):
        _cast_initial(client)
        relevant = client.get("/records", params={"state": "relevant"}, headers=ALICE).json()
        open_ones = client.get("/records", params={"state": "to_decide"}, headers=ALICE).json()
        assert [r["no"] for r in relevant["records"]] == ["DB-0001", "DB-0002"]
        assert [r["no"] for r in open_ones["records"]] == ["DB-0005", "DB-0006"]

    def test_unknown_state_filter_rejected(self, client):
        resp = client.get("/records", params={"state": "maybe"}, headers=ALICE)
        assert resp.status_code == 400

    def test_detail_fields(self, client):
        body = client.get("/records/DB-0003", headers=ALICE).json()
        record = body["record"]
        assert record["no"] == "DB-0003"
        assert record["db_no"] == "3"
        assert record["title"] == "Study number 3"
        assert record["authors"] == ["Author3, A."]
        assert record["source_venue"] == "Journal of Tests"
        assert record["publication_vehicle"] == "journal"
        assert record["publisher_database"] == "DB"
        assert record["year"] == 2017
        assert record["state"] == "to_decide"
        assert record["your_vote"] is None
        assert {c["id"] for c in body["criteria"]} == {"I1", "E1", "E2"}

    def test_detail_reports_own_vote_only(self, client):
        _vote(client, ALICE, "DB-0001", 1)
        mine = client.get("/records/DB-0001", headers=ALICE).json()["record"]
        theirs = client.get("/records/DB-0001", headers=BOB).json()["record"]
        assert mine["your_vote"] == 1
        assert theirs["your_vote"] is None
        assert "votes" not in mine

    def test_detail_shows_all_votes_to_the_moderator_only(self, client):
        _vote(client, ALICE, "DB-0001", 1)
        _vote(client, BOB, "DB-0001", 0, round_no=2)
        reviewer_body = client.get("/records/DB-0001", headers=ALICE).json()
        moderator_body = client.get("/records/DB-0001", headers=DANA).json()
        assert "votes" not in reviewer_body
        side_by_side = {(v["reviewer"], v["round"]): v["value"] for v in moderator_body["votes"]}
        assert side_by_side == {("alice", 1): 1, ("bob", 2): 0}

    def test_unknown_record_is_404(self, client):
        resp = client.get("/records/DB-9999", headers=ALICE)
        assert resp.status_code == 404
        assert _error(resp)["code"] == "precondition"


class TestVoting:
    def test_vote_accepted_and_persisted(self, client, store):
        resp = _vote(client, ALICE, "DB-0001", 1)
        assert resp.status_code == 200
        body = resp.json()
        assert body["accepted"] is True
        assert body["vote"]["reviewer"] == "alice"
        assert body["vote"]["round"] == 1
        assert body["revision"] == REV
        stored = store.load_votes()
        assert len(stored) == 1 and stored[0].paper == "DB-0001"

    def test_round_is_inferred_per_reviewer(self, client):
        assert _vote(client, ALICE, "DB-0001", 1).json()["vote"]["round"] == 1
        assert _vote(client, BOB, "DB-0001", 1).json()["vote"]["round"] == 2

    def test_wrong_round_rejected(self, client):
        resp = _vote(client, ALICE, "DB-0001", 1, round_no=2)
        assert resp.status_code == 400
        assert _error(resp)["code"] == "vote"

    def test_off_scale_value_rejected(self, client, store):
        resp = _vote(client, ALICE, "DB-0001", 7)
        assert resp.status_code == 400
        assert _error(resp)["code"] == "vote"
        assert store.load_votes() == []

    def test_off_scale_on_likert_five(self, tmp_path):
        s = ProjectStore(tmp_path / "likert")
        s.save(_project(scale=Scale.likert5()))
        c = TestClient(create_app(s))
        assert _vote(c, ALICE, "DB-0001", 7).status_code == 400
        assert _vote(c, ALICE, "DB-0001", 4).status_code == 200

    def test_duplicate_vote_is_conflict(self, client, store):
        assert _vote(client, ALICE, "DB-0001", 1).status_code == 200
        resp = _vote(client, ALICE, "DB-0001", 0)
        assert resp.status_code == 409
        assert _error(resp)["code"] == "vote"
        assert len(store.load_votes()) == 1

    def test_stale_revision_is_conflict(self, client):
        resp = _vote(client, ALICE, "DB-0001", 1, revision=REV - 1)
        assert resp.status_code == 409
        body = _error(resp)
        assert body["code"] == "stale_revision"
        assert "refresh" in body["message"]
        assert body["details"] == {"expected": REV, "got": REV - 1}

    def test_unknown_paper_is_404(self, client):
        assert _vote(client, ALICE, "DB-9999", 1).status_code == 404

    def test_missing_fields_rejected(self, client):
        resp = client.post("/votes", json={"paper": "DB-0001"}, headers=ALICE)
        assert resp.status_code == 400

    def test_non_integer_value_rejected(self, client):
        resp = client.post(
            "/votes",
            json={"paper": "DB-0001", "value": "yes", "revision": REV},
            headers=ALICE,
        )
        assert resp.status_code == 400


class TestWorklist:
    def test_initial_worklists(self, client):
        alice = client.get("/worklist", headers=ALICE).json()
        carol = client.get("/worklist", headers=CAROL).json()
        assert alice["papers"] == list(PAPERS)
        assert alice["round"] == 1
        assert carol["papers"] == []
        assert carol["round"] == 3

    def test_worklist_shrinks_with_votes(self, client):
        _vote(client, ALICE, "DB-0001", 1)
        papers = client.get("/worklist", headers=ALICE).json()["papers"]
        assert papers == list(PAPERS[1:])

    def test_third_reviewer_sees_only_disagreements(self, client):
        _cast_initial(client)
        carol = client.get("/worklist", headers=CAROL).json()
        assert carol["papers"] == ["DB-0005", "DB-0006"]
        disagreements = [i for i in ALICE_VOTES if ALICE_VOTES[i] != BOB_VOTES[i]]
        assert len(carol["papers"]) == len(disagreements)

    def test_third_reviewer_cannot_vote_outside_reduced_list(self, client):
        _cast_initial(client)
        resp = _vote(client, CAROL, "DB-0001", 1)
        assert resp.status_code == 400
        assert "reduced list" in _error(resp)["message"]

    def test_moderator_has_no_worklist(self, client):
        assert client.get("/worklist", headers=DANA).json()["papers"] == []


class TestThirdReviewer:
    def test_tie_break_decides_paper(self, client):
        _cast_initial(client)
        assert _vote(client, CAROL, "DB-0005", 1).status_code == 200
        record = client.get("/records/DB-0005", headers=CAROL).json()["record"]
        assert record["state"] == "relevant"
        assert record["decided_by"] == "third_reviewer"

    def test_exclusion_carries_policy_criteria(self, client):
        _cast_initial(client)
        assert _vote(client, CAROL, "DB-0006", 0).status_code == 200
        record = client.get("/records/DB-0006", headers=CAROL).json()["record"]
        assert record["state"] == "irrelevant"
        assert record["criteria_applied"] == ["E1"]


class TestAgreement:
    def test_cohen_kappa_matches_hand_computation(self, client):
        _cast_initial(client)
        body = client.get("/agreement", params={"method": "cohen_kappa"}, headers=ALICE).json()
        assert abs(body["value"] - EXPECTED_KAPPA) < 1e-9
        assert body["n_items"] == 6
        assert body["n_raters"] == 2
        assert body["per_item_status"]["DB-0001"] == "agree_include"
        assert body["per_item_status"]["DB-0003"] == "agree_exclude"
        assert body["per_item_status"]["DB-0005"] == "disagree"

    def test_percent_agreement(self, client):
        _cast_initial(client)
        body = client.get("/agreement", params={"method": "percent"}, headers=ALICE).json()
        assert abs(body["value"] - EXPECTED_PERCENT) < 1e-9

    def test_fleiss_kappa_reports(self, client):
        _cast_initial(client)
        body = client.get("/agreement", params={"method": "fleiss_kappa"}, headers=ALICE).json()
        assert body["method"] == "fleiss_kappa"
        assert body["value"] is not None
        assert -1.0 <= body["value"] <= 1.0

    def test_weighted_kappa_on_binary_scale_rejected(self, client):
        _cast_initial(client)
        resp = client.get(
            "/agreement", params={"method": "weighted_cohen_kappa"}, headers=ALICE
        )
        assert resp.status_code == 400
        assert "cohen_kappa" in _error(resp)["message"]

    def test_unknown_method_rejected(self, client):
        resp = client.get("/agreement", params={"method": "alpha"}, headers=ALICE)
        assert resp.status_code == 400


class TestDecisions:
    def _open_paper(self, client):
        """After initial votes, papers 5 and 6 are still open."""
        _cast_initial(client)
        return "DB-0006"

    def test_moderator_records_decision(self, client, store):
        paper = self._open_paper(client)
        resp = client.post(
            "/decisions",
            json={"paper": paper, "state": "relevant", "criteria": [], "revision": REV},
            headers=DANA,
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["decision"]["state"] == "relevant"
        assert body["decision"]["decided_by"] == "moderator"
        stored = store.load_decisions()
        assert len(stored) == 1 and stored[0].paper == paper
        record = client.get(f"/records/{paper}", headers=ALICE).json()["record"]
        assert record["state"] == "relevant"

    def test_exclusion_without_criterion_impossible(self, client, store):
        paper = self._open_paper(client)
        resp = client.post(
            "/decisions",
            json={"paper": paper, "state": "irrelevant", "criteria": [], "revision": REV},
            headers=DANA,
        )
        assert resp.status_code == 400
        assert _error(resp)["code"] == "vote"
        assert store.load_decisions() == []

    def test_exclusion_with_criterion_recorded(self, client):
        paper = self._open_paper(client)
        resp = client.post(
            "/decisions",
            json={"paper": paper, "state": "irrelevant", "criteria": ["E2"], "revision": REV},
            headers=DANA,
        )
        assert resp.status_code == 200
        assert resp.json()["decision"]["criteria_applied"] == ["E2"]

    def test_unknown_criterion_rejected(self, client):
        paper = self._open_paper(client)
        resp = client.post(
            "/decisions",
            json={"paper": paper, "state": "irrelevant", "criteria": ["E9"], "revision": REV},
            headers=DANA,
        )
        assert resp.status_code == 400

    def test_plain_reviewer_cannot_decide(self, client):
        paper = self._open_paper(client)
        resp = client.post(
            "/decisions",
            json={"paper": paper, "state": "relevant", "criteria": [], "revision": REV},
            headers=ALICE,
        )
        assert resp.status_code == 403
        assert _error(resp)["code"] == "precondition"

    def test_settled_paper_cannot_be_redecided(self, client):
        _cast_initial(client)
        resp = client.post(
            "/decisions",
            json={"paper": "DB-0001", "state": "irrelevant", "criteria": ["E1"], "revision": REV},
            headers=DANA,
        )
        assert resp.status_code == 409

    def test_stale_revision_rejected(self, client):
        paper = self._open_paper(client)
        resp = client.post(
            "/decisions",
            json={"paper": paper, "state": "relevant", "criteria": [], "revision": 1},
            headers=DANA,
        )
        assert resp.status_code == 409
        assert _error(resp)["code"] == "stale_revision"

    def test_invalid_state_rejected(self, client):
        paper = self._open_paper(client)
        for bad in ("maybe", "to_decide"):
            resp = client.post(
                "/decisions",
                json={"paper": paper, "state": bad, "criteria": [], "revision": REV},
                headers=DANA,
            )
            assert resp.status_code in (400, 409), bad


class TestFunnel:
    def test_funnel_structure(self, client):
        body = client.get("/funnel", headers=ALICE).json()
        funnel = body["funnel"]
        assert funnel["databases"] == ["DB"]
        titles = [s["title"] for s in funnel["sections"]]
        assert titles[0].startswith("Step 1") and titles[3].startswith("Step 4")
        search_row = funnel["sections"][0]["rows"][0]
        assert search_row["total"] == 8
        result_row = funnel["sections"][2]["rows"][-1]
        assert result_row["total"] == 6
        assert body["text"].startswith("Search and selection report")

    def test_final_count_follows_decisions(self, client):
        _cast_initial(client)
        _vote(client, CAROL, "DB-0005", 1)
        client.post(
            "/decisions",
            json={"paper": "DB-0006", "state": "relevant", "criteria": [], "revision": REV},
            headers=DANA,
        )
        funnel = client.get("/funnel", headers=ALICE).json()["funnel"]
        final_row = funnel["sections"][3]["rows"][0]
        # papers 1 and 2 by aggregate, 5 by the third reviewer, 6 by the moderator
        assert final_row["total"] == 4


class TestReplayability:
    def test_fresh_process_reaches_same_state(self, client, store):
        _cast_initial(client)
        _vote(client, CAROL, "DB-0005", 1)
        client.post(
            "/decisions",
            json={"paper": "DB-0006", "state": "irrelevant", "criteria": ["E1"], "revision": REV},
            headers=DANA,
        )
        before = client.get("/records", params={"page_size": 50}, headers=ALICE).json()

        fresh = TestClient(create_app(store))
        after = fresh.get("/records", params={"page_size": 50}, headers=ALICE).json()
        assert after == before
        states = {r["no"]: r["state"] for r in after["records"]}
        assert states["DB-0005"] == "relevant"
        assert states["DB-0006"] == "irrelevant"


class TestReadsAreSideEffectFree:
    def test_get_sweep_changes_nothing(self, client, store):
        project_bytes = store.project_path.read_bytes()
        for path in ("/project", "/records", "/records/DB-0001", "/worklist", "/funnel"):
            assert client.get(path, headers=ALICE).status_code == 200
        client.get("/agreement", params={"method": "percent"}, headers=ALICE)
        assert store.project_path.read_bytes() == project_bytes
        assert store.load_votes() == []
        assert store.load_decisions() == []
        assert not (store.root / "votes.jsonl").exists()
