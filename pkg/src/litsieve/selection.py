"""Voting engine: reviewer assignment, vote capture, rating aggregation, decisions.

The vote log is append-only and every aggregate is a pure fold over it, so
replaying the log always reproduces the current decision state.
"""

from __future__ import annotations

import csv
import io
import random
import statistics
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Optional, Sequence

from .errors import PreconditionError, VoteError
from .model import Aggregator, Dataset, Scale, SelectionPolicy, WorkflowKind
from .util import now_iso

THRESHOLD_TOLERANCE = 1e-9


class Relevance(str, Enum):
    RELEVANT = "relevant"
    IRRELEVANT = "irrelevant"
    TO_DECIDE = "to_decide"


class DecidedBy(str, Enum):
    AGGREGATE = "aggregate"
    THIRD_REVIEWER = "third_reviewer"
    WORKSHOP = "workshop"
    MODERATOR = "moderator"


@dataclass(frozen=True)
class Vote:
    reviewer: str
    paper: str
    value: int
    round: int = 1
    timestamp: str = ""

    def __post_init__(self) -> None:
        if self.round < 1:
            raise VoteError(f"round must be >= 1, got {self.round}")


@dataclass(frozen=True)
class Decision:
    paper: str
    state: Relevance
    decided_by: DecidedBy
    criteria_applied: tuple[str, ...] = ()
    timestamp: str = ""


@dataclass(frozen=True)
class VotingMatrix:
    """The n x m reviewer-by-paper vote table."""

    reviewers: tuple[str, ...]
    papers: tuple[str, ...]
    cells: Mapping[tuple[str, str], int]
    scale: Scale

    def __post_init__(self) -> None:
        reviewers, papers = set(self.reviewers), set(self.papers)
        for (reviewer, paper), value in self.cells.items():
            if reviewer not in reviewers:
                raise VoteError(f"cell references unknown reviewer {reviewer!r}")
            if paper not in papers:
                raise VoteError(f"cell references unknown paper {paper!r}")
            if not self.scale.contains(value):
                raise VoteError(f"cell value {value} outside scale [{self.scale.lo}, {self.scale.hi}]")

    @classmethod
    def from_votes(
        cls,
        votes: Sequence[Vote],
        reviewers: Sequence[str],
        papers: Sequence[str],
        scale: Scale,
        rounds: Optional[Sequence[int]] = None,
    ) -> "VotingMatrix":
        cells: dict[tuple[str, str], int] = {}
        for vote in votes:
            if rounds is not None and vote.round not in rounds:
                continue
            key = (vote.reviewer, vote.paper)
            if key in cells:
                raise VoteError(f"reviewer {vote.reviewer!r} has two votes for {vote.paper!r}")
            cells[key] = vote.value
        return cls(tuple(reviewers), tuple(papers), cells, scale)

    def column(self, paper: str) -> dict[str, int]:
        return {r: self.cells[(r, paper)] for r in self.reviewers if (r, paper) in self.cells}


def rating(
    values: Sequence[int],
    weights: Optional[Sequence[float]] = None,
    scale: Optional[Scale] = None,
) -> float:
    """Headcount rating: the (optionally weighted) sum of a paper's votes."""
    if not values:
        raise VoteError("rating needs at least one vote")
    if scale is not None:
        off = [v for v in values if not scale.contains(v)]
        if off:
            raise VoteError(f"votes outside scale [{scale.lo}, {scale.hi}]: {off}")
    if weights is None:
        return float(sum(values))
    if len(weights) != len(values):
        raise VoteError("weights must pair up with votes")
    return float(sum(w * v for w, v in zip(weights, values)))


def weighted_3point_rating(values: Sequence[int], scale: Optional[Scale] = None) -> float:
    """3-point rating: |(min + 4*mean + max) / 6|, a convex blend of the votes."""
    if not values:
        raise VoteError("3-point rating needs at least one vote")
    if scale is not None:
        off = [v for v in values if not scale.contains(v)]
        if off:
            raise VoteError(f"votes outside scale [{scale.lo}, {scale.hi}]: {off}")
    return abs((min(values) + 4 * statistics.mean(values) + max(values)) / 6)


def relevance(value: float, threshold: float, tolerance: float = THRESHOLD_TOLERANCE) -> Relevance:
    """Trichotomy against the threshold; equality (within tolerance) stays open."""
    if abs(value - threshold) <= tolerance:
        return Relevance.TO_DECIDE
    return Relevance.RELEVANT if value > threshold else Relevance.IRRELEVANT


def aggregate_relative(values: Sequence[int], method: Aggregator) -> Optional[float]:
    """Mean or mode of relative-rating votes; None when the mode is ambiguous."""
    if not values:
        raise VoteError("relative aggregation needs at least one vote")
    if method is Aggregator.MEAN:
        return float(statistics.mean(values))
    if method is Aggregator.MODE:
        counts: dict[int, int] = {}
        for v in values:
            counts[v] = counts.get(v, 0) + 1
        top = max(counts.values())
        modes = [v for v, c in counts.items() if c == top]
        return float(modes[0]) if len(modes) == 1 else None
    raise PreconditionError(f"{method.value} is not a relative-rating method")


def assign_overlapping_subsets(
    papers: Sequence[str], reviewers: Sequence[str], coverage: int, seed: int
) -> dict[str, tuple[str, ...]]:
    """Give every paper exactly ``coverage`` reviewers with balanced loads.

    Greedy least-loaded choice keeps any two reviewers' loads within 1 of each
    other; the seed fixes tie-breaking so assignments are reproducible.
    """
    if coverage < 1:
        raise PreconditionError("coverage must be at least 1")
    if coverage > len(reviewers):
        raise PreconditionError(
            f"coverage {coverage} exceeds the {len(reviewers)} available reviewers"
        )
    if len(set(reviewers)) != len(reviewers):
        raise PreconditionError("reviewer ids must be unique")
    rng = random.Random(seed)
    order = list(papers)
    rng.shuffle(order)
    loads: dict[str, int] = {r: 0 for r in reviewers}
    assignment: dict[str, tuple[str, ...]] = {}
    for paper in order:
        ranked = sorted(loads, key=lambda r: (loads[r], rng.random()))
        chosen = ranked[:coverage]
        for r in chosen:
            loads[r] += 1
        assignment[paper] = tuple(sorted(chosen))
    return {p: assignment[p] for p in papers}


def _initial_reviewers(policy: SelectionPolicy, reviewers: Sequence[str]) -> tuple[str, ...]:
    if policy.workflow in (WorkflowKind.TWO_PLUS_ONE, WorkflowKind.TWO_REVIEWER_WORKSHOP):
        return tuple(reviewers[:2])
    return tuple(reviewers)


def _initial_rounds(policy: SelectionPolicy) -> Optional[tuple[int, ...]]:
    if policy.workflow in (WorkflowKind.TWO_PLUS_ONE, WorkflowKind.TWO_REVIEWER_WORKSHOP):
        return (1, 2)
    if policy.workflow is WorkflowKind.OVERLAPPING_SUBSETS:
        return (1,)
    return None  # custom: every round counts


def _single_vote_state(value: int, scale: Scale) -> Relevance:
    if scale.neutral is not None:
        if value == scale.neutral:
            return Relevance.TO_DECIDE
        return Relevance.RELEVANT if value > scale.neutral else Relevance.IRRELEVANT
    return Relevance.RELEVANT if value == scale.hi else Relevance.IRRELEVANT


def _aggregate_state(values: Sequence[int], weights: Sequence[float], policy: SelectionPolicy) -> Relevance:
    scale = policy.scale
    if policy.aggregator is Aggregator.HEADCOUNT_SUM:
        value: Optional[float] = rating(values, weights, scale)
    elif policy.aggregator is Aggregator.WEIGHTED_3POINT:
        value = weighted_3point_rating(values, scale)
        if policy.round_three_point:
            value = float(int(value + 0.5))
    else:
        value = aggregate_relative(values, policy.aggregator)
        if value is None:  # multimodal: requires extra handling
            return Relevance.TO_DECIDE
    if scale.neutral is not None and abs(value - scale.neutral) <= THRESHOLD_TOLERANCE:
        return Relevance.TO_DECIDE
    return relevance(value, policy.threshold)


def compute_decisions(
    papers: Sequence[str],
    reviewers: Sequence[str],
    policy: SelectionPolicy,
    votes: Sequence[Vote],
    recorded: Sequence[Decision] = (),
    assignment: Optional[Mapping[str, Sequence[str]]] = None,
) -> dict[str, Decision]:
    """Replay the vote and decision logs into one Decision per paper.

    Deterministic fold: initial-round aggregation first, then the third
    reviewer's tie-break votes (two_plus_one), then recorded workshop or
    moderator decisions, which only ever apply to still-open papers.
    """
    initial = _initial_reviewers(policy, reviewers)
    rounds = _initial_rounds(policy)
    third = reviewers[2] if policy.workflow is WorkflowKind.TWO_PLUS_ONE and len(reviewers) > 2 else None

    by_paper: dict[str, dict[str, int]] = {p: {} for p in papers}
    third_votes: dict[str, int] = {}
    for vote in votes:
        if vote.paper not in by_paper:
            continue
        if third is not None and vote.reviewer == third and vote.round == 3:
            third_votes[vote.paper] = vote.value
            continue
        if rounds is not None and vote.round not in rounds:
            continue
        by_paper[vote.paper][vote.reviewer] = vote.value

    exclusion = tuple(policy.vote_exclusion_criteria)
    out: dict[str, Decision] = {}
    for paper in papers:
        required = tuple(assignment[paper]) if assignment is not None else initial
        cast = by_paper[paper]
        if any(r not in cast for r in required):
            out[paper] = Decision(paper, Relevance.TO_DECIDE, DecidedBy.AGGREGATE)
            continue
        values = [cast[r] for r in required]
        weights = [policy.reviewer_weights.get(r, 1.0) for r in required]
        state = _aggregate_state(values, weights, policy)
        decision = Decision(
            paper,
            state,
            DecidedBy.AGGREGATE,
            criteria_applied=exclusion if state is Relevance.IRRELEVANT else (),
        )
        if state is Relevance.TO_DECIDE and paper in third_votes:
            tie_state = _single_vote_state(third_votes[paper], policy.scale)
            if tie_state is not Relevance.TO_DECIDE:
                decision = Decision(
                    paper,
                    tie_state,
                    DecidedBy.THIRD_REVIEWER,
                    criteria_applied=exclusion if tie_state is Relevance.IRRELEVANT else (),
                )
        out[paper] = decision

    for recorded_decision in recorded:
        paper = recorded_decision.paper
        if paper in out and out[paper].state is Relevance.TO_DECIDE:
            out[paper] = recorded_decision
    return out


@dataclass(frozen=True)
class SelectionRun:
    """One staged selection process: immutable snapshot of votes and decisions."""

    papers: tuple[str, ...]
    reviewers: tuple[str, ...]
    policy: SelectionPolicy
    votes: tuple[Vote, ...] = ()
    recorded: tuple[Decision, ...] = ()
    assignment: Optional[Mapping[str, tuple[str, ...]]] = None

    def __post_init__(self) -> None:
        workflow = self.policy.workflow
        if workflow is WorkflowKind.TWO_PLUS_ONE and len(self.reviewers) < 3:
            raise PreconditionError("the 2+1 workflow needs three reviewers")
        if workflow is WorkflowKind.TWO_REVIEWER_WORKSHOP and len(self.reviewers) < 2:
            raise PreconditionError("the workshop workflow needs two reviewers")
        if workflow is WorkflowKind.OVERLAPPING_SUBSETS and self.assignment is None:
            raise PreconditionError("overlapping-subsets runs need an assignment map")
        if self.assignment is not None:
            missing = [p for p in self.papers if p not in self.assignment]
            if missing:
                raise PreconditionError(f"assignment misses papers: {missing}")

    # -- reading ---------------------------------------------------------

    def decisions(self) -> dict[str, Decision]:
        return compute_decisions(
            self.papers, self.reviewers, self.policy, self.votes, self.recorded, self.assignment
        )

    def undecided(self) -> tuple[str, ...]:
        decided = self.decisions()
        return tuple(p for p in self.papers if decided[p].state is Relevance.TO_DECIDE)

    def reduced_list(self) -> tuple[str, ...]:
        """Papers the third reviewer sees: rated by both initial reviewers, still tied."""
        initial = _initial_reviewers(self.policy, self.reviewers)
        rounds = _initial_rounds(self.policy)
        cast: dict[str, set[str]] = {p: set() for p in self.papers}
        for vote in self.votes:
            if vote.paper in cast and (rounds is None or vote.round in rounds):
                if vote.reviewer in initial:
                    cast[vote.paper].add(vote.reviewer)
        fully_rated = {p for p in self.papers if set(initial) <= cast[p]}
        open_papers = set(self.undecided())
        # drop papers already answered by a round-3 vote
        third = self.reviewers[2] if len(self.reviewers) > 2 else None
        answered = {v.paper for v in self.votes if third and v.reviewer == third and v.round == 3}
        return tuple(
            p for p in self.papers
            if p in fully_rated and p in open_papers and p not in answered
        )

    def worklist(self, reviewer: str) -> tuple[str, ...]:
        """Assigned papers this reviewer still has to vote on."""
        if reviewer not in self.reviewers:
            raise PreconditionError(f"unknown reviewer {reviewer!r}")
        workflow = self.policy.workflow
        voted = {v.paper for v in self.votes if v.reviewer == reviewer}
        if workflow is WorkflowKind.TWO_PLUS_ONE and reviewer == self.reviewers[2]:
            return tuple(p for p in self.reduced_list() if p not in voted)
        if workflow in (WorkflowKind.TWO_PLUS_ONE, WorkflowKind.TWO_REVIEWER_WORKSHOP):
            if reviewer not in self.reviewers[:2]:
                return ()
            return tuple(p for p in self.papers if p not in voted)
        if workflow is WorkflowKind.OVERLAPPING_SUBSETS:
            assert self.assignment is not None
            return tuple(
                p for p in self.papers if reviewer in self.assignment[p] and p not in voted
            )
        return tuple(p for p in self.papers if p not in voted)

    def required_round(self, reviewer: str) -> int:
        if self.policy.workflow in (WorkflowKind.TWO_PLUS_ONE, WorkflowKind.TWO_REVIEWER_WORKSHOP):
            roles = {r: i + 1 for i, r in enumerate(self.reviewers[:3])}
            if reviewer in roles:
                return roles[reviewer]
        return 1

    # -- writing ---------------------------------------------------------

    def cast(self, vote: Vote) -> "SelectionRun":
        """Validate and append one vote; duplicates are rejected, never overwritten."""
        if vote.reviewer not in self.reviewers:
            raise VoteError(f"reviewer {vote.reviewer!r} is not part of this run")
        if vote.paper not in self.papers:
            raise VoteError(f"paper {vote.paper!r} is not part of this run")
        if not self.policy.scale.contains(vote.value):
            raise VoteError(
                f"value {vote.value} outside scale [{self.policy.scale.lo}, {self.policy.scale.hi}]"
            )
        for existing in self.votes:
            if (existing.reviewer, existing.paper, existing.round) == (
                vote.reviewer,
                vote.paper,
                vote.round,
            ):
                raise VoteError(
                    f"duplicate vote: {vote.reviewer} already voted {vote.paper} in round {vote.round}"
                )
        workflow = self.policy.workflow
        if workflow in (WorkflowKind.TWO_PLUS_ONE, WorkflowKind.TWO_REVIEWER_WORKSHOP):
            roles = self.reviewers[:3] if workflow is WorkflowKind.TWO_PLUS_ONE else self.reviewers[:2]
            if vote.reviewer not in roles:
                raise VoteError(f"reviewer {vote.reviewer!r} has no voting role in this workflow")
            expected = self.required_round(vote.reviewer)
            if vote.round != expected:
                raise VoteError(
                    f"{vote.reviewer} votes in round {expected}, not round {vote.round}"
                )
            if expected == 3 and vote.paper not in self.reduced_list():
                raise VoteError(
                    f"paper {vote.paper!r} is already decided; the third reviewer only sees the reduced list"
                )
        if workflow is WorkflowKind.OVERLAPPING_SUBSETS:
            assert self.assignment is not None
            if vote.reviewer not in self.assignment[vote.paper]:
                raise VoteError(f"paper {vote.paper!r} is not assigned to {vote.reviewer!r}")
        stamped = vote if vote.timestamp else replace(vote, timestamp=now_iso())
        return replace(self, votes=self.votes + (stamped,))

    def record_decision(
        self,
        paper: str,
        state: Relevance,
        criteria: Sequence[str] = (),
        decided_by: DecidedBy = DecidedBy.WORKSHOP,
    ) -> "SelectionRun":
        """Record a workshop/moderator decision for a still-open paper."""
        if paper not in self.papers:
            raise PreconditionError(f"unknown paper {paper!r}")
        if state is Relevance.TO_DECIDE:
            raise PreconditionError("a recorded decision must settle the paper")
        if decided_by not in (DecidedBy.WORKSHOP, DecidedBy.MODERATOR):
            raise PreconditionError("recorded decisions come from workshops or the moderator")
        if state is Relevance.IRRELEVANT and not criteria:
            raise VoteError("excluding a paper requires at least one exclusion criterion")
        if self.decisions()[paper].state is not Relevance.TO_DECIDE:
            raise PreconditionError(f"paper {paper!r} is already decided")
        decision = Decision(paper, state, decided_by, tuple(criteria), timestamp=now_iso())
        return replace(self, recorded=self.recorded + (decision,))

    def close_round(self, round_no: int) -> None:
        """Verify a round is complete; raises listing every missing vote."""
        missing: list[tuple[str, str]] = []
        cast = {(v.reviewer, v.paper) for v in self.votes if v.round == round_no}
        for reviewer, paper in self._required_pairs(round_no):
            if (reviewer, paper) not in cast:
                missing.append((reviewer, paper))
        if missing:
            raise PreconditionError(
                f"round {round_no} cannot close; {len(missing)} votes missing",
                details=sorted(missing),
            )

    def _required_pairs(self, round_no: int) -> list[tuple[str, str]]:
        workflow = self.policy.workflow
        if workflow in (WorkflowKind.TWO_PLUS_ONE, WorkflowKind.TWO_REVIEWER_WORKSHOP):
            if round_no in (1, 2):
                reviewer = self.reviewers[round_no - 1]
                return [(reviewer, p) for p in self.papers]
            if round_no == 3 and workflow is WorkflowKind.TWO_PLUS_ONE:
                third = self.reviewers[2]
                answered = {v.paper for v in self.votes if v.reviewer == third and v.round == 3}
                return [(third, p) for p in sorted(set(self.reduced_list()) | answered)]
            return []
        if workflow is WorkflowKind.OVERLAPPING_SUBSETS:
            assert self.assignment is not None
            if round_no == 1:
                return [(r, p) for p in self.papers for r in self.assignment[p]]
            return []
        return [(r, p) for p in self.papers for r in self.reviewers] if round_no == 1 else []


def finalize(
    integrated: Dataset, decisions: Mapping[str, Decision]
) -> tuple[Dataset, tuple[Decision, ...]]:
    """Cut the baseline: keep relevant records only, refuse while anything is open."""
    undecided = [
        r.id
        for r in integrated.records
        if r.id not in decisions or decisions[r.id].state is Relevance.TO_DECIDE
    ]
    if undecided:
        raise PreconditionError(
            f"{len(undecided)} papers are not decided yet", details=sorted(undecided)
        )
    uncited = [
        r.id
        for r in integrated.records
        if decisions[r.id].state is Relevance.IRRELEVANT and not decisions[r.id].criteria_applied
    ]
    if uncited:
        raise PreconditionError(
            "irrelevant papers must cite at least one exclusion criterion",
            details=sorted(uncited),
        )
    relevant = tuple(
        r for r in integrated.records if decisions[r.id].state is Relevance.RELEVANT
    )
    ordered = tuple(decisions[r.id] for r in integrated.records)
    decided = Dataset(
        records=relevant, merge_log=integrated.merge_log, revision=integrated.revision + 1
    )
    return decided, ordered


# -- CSV interchange -----------------------------------------------------

VOTE_COLUMNS = ("reviewer", "paper", "round", "value", "timestamp")


def votes_to_csv(votes: Sequence[Vote]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(VOTE_COLUMNS)
    for vote in votes:
        writer.writerow([vote.reviewer, vote.paper, vote.round, vote.value, vote.timestamp])
    return buffer.getvalue()


def votes_from_csv(text: str) -> list[Vote]:
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row]
    if not rows:
        return []
    header = tuple(cell.strip() for cell in rows[0])
    if header != VOTE_COLUMNS:
        raise VoteError(f"vote CSV must have columns {','.join(VOTE_COLUMNS)}")
    votes = []
    for row in rows[1:]:
        reviewer, paper, round_no, value = row[0], row[1], int(row[2]), int(row[3])
        timestamp = row[4] if len(row) > 4 else ""
        votes.append(Vote(reviewer, paper, value, round_no, timestamp))
    return votes


def decisions_to_csv(decisions: Sequence[Decision]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["paper", "state", "decided_by", "criteria"])
    for d in decisions:
        writer.writerow([d.paper, d.state.value, d.decided_by.value, ";".join(d.criteria_applied)])
    return buffer.getvalue()


def decisions_from_csv(text: str) -> list[Decision]:
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row]
    if not rows:
        return []
    header = tuple(cell.strip() for cell in rows[0])
    if header != ("paper", "state", "decided_by", "criteria"):
        raise PreconditionError("decision CSV must have columns paper,state,decided_by,criteria")
    decisions = []
    for row in rows[1:]:
        criteria = tuple(c for c in row[3].split(";") if c) if len(row) > 3 else ()
        decisions.append(Decision(row[0], Relevance(row[1]), DecidedBy(row[2]), criteria))
    return decisions


def assignment_to_csv(assignment: Mapping[str, Sequence[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["paper", "reviewers"])
    for paper in assignment:
        writer.writerow([paper, ";".join(assignment[paper])])
    return buffer.getvalue()


def assignment_from_csv(text: str) -> dict[str, tuple[str, ...]]:
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row]
    if not rows:
        return {}
    header = tuple(cell.strip() for cell in rows[0])
    if header != ("paper", "reviewers"):
        raise PreconditionError("assignment CSV must have columns paper,reviewers")
    return {row[0]: tuple(r for r in row[1].split(";") if r) for row in rows[1:]}
