/**
 * In-process stand-in for the screening service, speaking the same JSON
 * contract over the Transport interface: bearer-token auth, uniform error
 * bodies, optimistic-concurrency revisions, vote and decision validation,
 * per-reviewer worklists, and the binary agreement grid.
 *
 * It exists so the interface tests exercise real request/response traffic
 * (including rejections, conflicts, and dropped connections) without a
 * running server process.
 */

import { NetworkError } from "../src/api.js";
import type { QueryParams, Transport, TransportRequest, TransportResponse } from "../src/api.js";
import type {
  CriterionInfo,
  DecisionBody,
  ItemStatus,
  RecordDetailResponse,
  RecordSummary,
  RelevanceState,
  ScaleInfo,
  VoteBody,
} from "../src/types.js";

export interface FakeReviewer {
  id: string;
  role: "reviewer" | "moderator";
  token: string;
}

export interface FakePaper {
  id: string;
  title: string;
  abstract?: string;
  keywords?: string[];
  year?: number;
  venue?: string;
}

export interface FakeConfig {
  workflow: "two_plus_one" | "two_reviewer_workshop" | "overlapping_subsets" | "custom";
  reviewers: FakeReviewer[];
  papers: FakePaper[];
  criteria: CriterionInfo[];
  scale?: ScaleInfo;
  threshold?: number;
  assignment?: Record<string, string[]>;
  revision?: number;
  voteExclusionCriteria?: string[];
}

const BINARY: ScaleInfo = { kind: "binary", lo: 0, hi: 1, neutral: null };

interface StoredDecision extends DecisionBody {}

function errorResponse(
  status: number,
  code: string,
  message: string,
  details: Record<string, unknown> = {},
): TransportResponse {
  return { status, body: { code, message, details } };
}

function ok(body: unknown): TransportResponse {
  return { status: 200, body };
}

export class FakeReviewService implements Transport {
  readonly config: FakeConfig;
  readonly votes: VoteBody[] = [];
  readonly decisions: StoredDecision[] = [];
  readonly log: { method: string; path: string }[] = [];
  revision: number;
  failNextRequests = 0;
  private clock = 0;

  constructor(config: FakeConfig) {
    this.config = config;
    this.revision = config.revision ?? 1;
  }

  private get scale(): ScaleInfo {
    return this.config.scale ?? BINARY;
  }

  private get threshold(): number {
    return this.config.threshold ?? 1.0;
  }

  private paperIds(): string[] {
    return this.config.papers.map((p) => p.id);
  }

  private reviewerIds(): string[] {
    return this.config.reviewers.map((r) => r.id);
  }

  /** Reviewers whose votes feed the aggregate (workflow dependent). */
  private initialReviewers(): string[] {
    if (this.config.workflow === "two_plus_one" || this.config.workflow === "two_reviewer_workshop") {
      return this.reviewerIds().slice(0, 2);
    }
    return this.reviewerIds();
  }

  private countedRounds(): number[] | null {
    if (this.config.workflow === "two_plus_one" || this.config.workflow === "two_reviewer_workshop") {
      return [1, 2];
    }
    if (this.config.workflow === "overlapping_subsets") {
      return [1];
    }
    return null;
  }

  private thirdReviewer(): string | null {
    if (this.config.workflow !== "two_plus_one") {
      return null;
    }
    const ids = this.reviewerIds();
    return ids.length > 2 ? ids[2] : null;
  }

  private requiredRound(reviewer: string): number {
    if (this.config.workflow === "two_plus_one" || this.config.workflow === "two_reviewer_workshop") {
      const index = this.reviewerIds().indexOf(reviewer);
      if (index >= 0 && index < 3) {
        return index + 1;
      }
    }
    return 1;
  }

  private countedVotesFor(paper: string): Map<string, number> {
    const rounds = this.countedRounds();
    const values = new Map<string, number>();
    for (const vote of this.votes) {
      if (vote.paper !== paper) {
        continue;
      }
      if (rounds !== null && !rounds.includes(vote.round)) {
        continue;
      }
      if (this.initialReviewers().includes(vote.reviewer)) {
        values.set(vote.reviewer, vote.value);
      }
    }
    return values;
  }

  private thirdVoteFor(paper: string): VoteBody | null {
    const third = this.thirdReviewer();
    if (third === null) {
      return null;
    }
    for (const vote of this.votes) {
      if (vote.paper === paper && vote.reviewer === third && vote.round === 3) {
        return vote;
      }
    }
    return null;
  }

  private singleVoteState(value: number): RelevanceState {
    const scale = this.scale;
    if (scale.neutral !== null) {
      if (value === scale.neutral) {
        return "to_decide";
      }
      return value > scale.neutral ? "relevant" : "irrelevant";
    }
    return value === scale.hi ? "relevant" : "irrelevant";
  }

  /** Aggregate state of one paper before recorded decisions. */
  private aggregateState(paper: string): RelevanceState {
    const required = this.config.assignment?.[paper] ?? this.initialReviewers();
    const values = this.countedVotesFor(paper);
    if (required.some((reviewer) => !values.has(reviewer))) {
      return "to_decide";
    }
    let total = 0;
    for (const reviewer of required) {
      total += values.get(reviewer) as number;
    }
    if (total > this.threshold + 1e-9) {
      return "relevant";
    }
    if (total < this.threshold - 1e-9) {
      return "irrelevant";
    }
    return "to_decide";
  }

  /** Full decision state: aggregate, then third-round vote, then records. */
  stateOf(paper: string): RelevanceState {
    let state = this.aggregateState(paper);
    if (state === "to_decide") {
      const third = this.thirdVoteFor(paper);
      if (third !== null) {
        state = this.singleVoteState(third.value);
      }
    }
    if (state === "to_decide") {
      for (const decision of this.decisions) {
        if (decision.paper === paper) {
          state = decision.state;
        }
      }
    }
    return state;
  }

  private decidedBy(paper: string): string | null {
    if (this.aggregateState(paper) !== "to_decide") {
      return "aggregate";
    }
    if (this.thirdVoteFor(paper) !== null && this.stateOf(paper) !== "to_decide") {
      return "third_reviewer";
    }
    for (const decision of this.decisions) {
      if (decision.paper === paper) {
        return decision.decided_by;
      }
    }
    return null;
  }

  private reducedList(): string[] {
    const initial = this.initialReviewers();
    const third = this.thirdReviewer();
    const answered = new Set(
      this.votes
        .filter((v) => third !== null && v.reviewer === third && v.round === 3)
        .map((v) => v.paper),
    );
    return this.paperIds().filter((paper) => {
      const values = this.countedVotesFor(paper);
      const fullyRated = initial.every((reviewer) => values.has(reviewer));
      return fullyRated && this.stateOf(paper) === "to_decide" && !answered.has(paper);
    });
  }

  private worklistFor(reviewer: string): string[] {
    const voted = new Set(this.votes.filter((v) => v.reviewer === reviewer).map((v) => v.paper));
    const workflow = this.config.workflow;
    const ids = this.reviewerIds();
    if (workflow === "two_plus_one" || workflow === "two_reviewer_workshop") {
      const initialCount = 2;
      const index = ids.indexOf(reviewer);
      if (workflow === "two_plus_one" && index === 2) {
        return this.reducedList().filter((p) => !voted.has(p));
      }
      if (index < 0 || index >= initialCount) {
        return [];
      }
      return this.paperIds().filter((p) => !voted.has(p));
    }
    if (workflow === "overlapping_subsets") {
      return this.paperIds().filter(
        (p) => (this.config.assignment?.[p] ?? []).includes(reviewer) && !voted.has(p),
      );
    }
    return this.paperIds().filter((p) => !voted.has(p));
  }

  private summaryOf(paper: FakePaper): RecordSummary {
    const state = this.stateOf(paper.id);
    const dash = paper.id.lastIndexOf("-");
    return {
      no: paper.id,
      db_no: dash >= 0 ? Number(paper.id.slice(dash + 1)) : 0,
      title: paper.title,
      authors: [],
      year: paper.year ?? 2015,
      source_venue: paper.venue ?? "Symposium on Searchable Abstracts",
      publication_vehicle: "conference",
      database: dash >= 0 ? paper.id.slice(0, dash) : paper.id,
      state,
      decided_by: state === "to_decide" ? null : this.decidedBy(paper.id),
    };
  }

  private detailOf(paper: FakePaper, caller: FakeReviewer): RecordDetailResponse {
    const own = this.votes.filter((v) => v.reviewer === caller.id && v.paper === paper.id);
    const last = own.length > 0 ? own[own.length - 1] : null;
    const summary = this.summaryOf(paper);
    const body: RecordDetailResponse = {
      record: {
        ...summary,
        keywords: paper.keywords ?? [],
        abstract: paper.abstract ?? "",
        publisher_database: summary.database,
        general_comments: "",
        metadata: {},
        full_text_available: false,
        completion_flags: [],
        criteria_applied: [],
        your_vote: last ? last.value : null,
        your_round: last ? last.round : null,
      },
      criteria: this.config.criteria,
    };
    if (caller.role === "moderator") {
      body.votes = this.votes.filter((v) => v.paper === paper.id);
    }
    return body;
  }

  private agreementReport(method: string): TransportResponse {
    if (this.scale.kind !== "binary") {
      return errorResponse(400, "precondition", "agreement grid needs a binary scale");
    }
    const raters = this.reviewerIds().slice(0, 2);
    const rounds = this.countedRounds();
    const perItem: Record<string, ItemStatus> = {};
    let agree = 0;
    let total = 0;
    const table: Record<string, number> = { "0,0": 0, "0,1": 0, "1,0": 0, "1,1": 0 };
    for (const paper of this.paperIds()) {
      const values: number[] = [];
      for (const rater of raters) {
        const vote = this.votes.find(
          (v) =>
            v.paper === paper &&
            v.reviewer === rater &&
            (rounds === null || rounds.includes(v.round)),
        );
        if (vote) {
          values.push(vote.value);
        }
      }
      if (values.length !== raters.length) {
        continue;
      }
      total += 1;
      table[`${values[0]},${values[1]}`] += 1;
      if (values.every((v) => v === 1)) {
        perItem[paper] = "agree_include";
        agree += 1;
      } else if (values.every((v) => v === 0)) {
        perItem[paper] = "agree_exclude";
        agree += 1;
      } else {
        perItem[paper] = "disagree";
      }
    }
    let value: number | null = null;
    const degenerate = total === 0;
    if (!degenerate) {
      if (method === "percent_agreement") {
        value = agree / total;
      } else {
        // Cohen's kappa over the 2x2 table; null when chance agreement is 1.
        const po = agree / total;
        const aYes = (table["1,1"] + table["1,0"]) / total;
        const bYes = (table["1,1"] + table["0,1"]) / total;
        const pe = aYes * bYes + (1 - aYes) * (1 - bYes);
        value = pe >= 1 - 1e-12 ? null : (po - pe) / (1 - pe);
      }
    }
    return ok({
      method,
      value,
      n_items: total,
      n_raters: raters.length,
      degenerate,
      per_item_status: perItem,
      strata: [],
    });
  }

  private projectBody(caller: FakeReviewer): unknown {
    const undecided = this.paperIds().filter((p) => this.stateOf(p) === "to_decide").length;
    return {
      name: "fixture-study",
      revision: this.revision,
      baseline_revision: null,
      workflow: this.config.workflow,
      scale: this.scale,
      threshold: this.threshold,
      aggregator: "headcount_sum",
      vote_exclusion_criteria: this.config.voteExclusionCriteria ?? [],
      research_questions: [],
      sources: [],
      criteria: this.config.criteria,
      reviewers: this.config.reviewers.map((r) => ({ id: r.id, role: r.role })),
      you: { id: caller.id, role: caller.role },
      counts: {
        papers: this.config.papers.length,
        votes: this.votes.length,
        decided_records: null,
        undecided,
      },
    };
  }

  private castVote(caller: FakeReviewer, body: Record<string, unknown>): TransportResponse {
    const paper = body.paper as string;
    if (!this.paperIds().includes(paper)) {
      return errorResponse(404, "precondition", `unknown paper ${paper}`);
    }
    if (body.revision !== this.revision) {
      return errorResponse(409, "stale_revision", "project changed since you loaded it", {
        expected: this.revision,
        got: body.revision,
      });
    }
    const value = body.value;
    if (typeof value !== "number" || !Number.isInteger(value)) {
      return errorResponse(400, "vote", "value must be an integer");
    }
    const round = body.round === undefined ? this.requiredRound(caller.id) : (body.round as number);
    if (
      this.votes.some((v) => v.reviewer === caller.id && v.paper === paper && v.round === round)
    ) {
      return errorResponse(
        409,
        "vote",
        `${caller.id} already voted on ${paper} in round ${round}; votes are never overwritten`,
      );
    }
    const scale = this.scale;
    if (value < scale.lo || value > scale.hi) {
      return errorResponse(400, "vote", `value ${value} outside scale [${scale.lo}, ${scale.hi}]`);
    }
    const workflow = this.config.workflow;
    const ids = this.reviewerIds();
    if (workflow === "two_plus_one" || workflow === "two_reviewer_workshop") {
      const votingSeats = workflow === "two_plus_one" ? 3 : 2;
      const index = ids.indexOf(caller.id);
      if (index < 0 || index >= votingSeats) {
        return errorResponse(400, "vote", `${caller.id} has no voting seat in this workflow`);
      }
      const expected = this.requiredRound(caller.id);
      if (round !== expected) {
        return errorResponse(
          400,
          "vote",
          `${caller.id} votes in round ${expected}, not round ${round}`,
        );
      }
      if (workflow === "two_plus_one" && index === 2 && !this.reducedList().includes(paper)) {
        return errorResponse(400, "vote", `paper ${paper} is not on the round-3 list`);
      }
    }
    if (workflow === "overlapping_subsets") {
      const team = this.config.assignment?.[paper] ?? [];
      if (!team.includes(caller.id)) {
        return errorResponse(400, "vote", `paper ${paper} is not assigned to ${caller.id}`);
      }
    }
    this.clock += 1;
    const vote: VoteBody = {
      reviewer: caller.id,
      paper,
      value,
      round,
      timestamp: `2026-08-16T00:00:${String(this.clock % 60).padStart(2, "0")}Z`,
    };
    this.votes.push(vote);
    return ok({ accepted: true, vote, revision: this.revision });
  }

  private recordDecision(caller: FakeReviewer, body: Record<string, unknown>): TransportResponse {
    const workshopSeats =
      this.config.workflow === "two_reviewer_workshop" ? this.reviewerIds().slice(0, 2) : [];
    if (caller.role !== "moderator" && !workshopSeats.includes(caller.id)) {
      return errorResponse(
        403,
        "precondition",
        "only the moderator (or the two workshop reviewers) may record decisions",
      );
    }
    const paper = body.paper as string;
    if (!this.paperIds().includes(paper)) {
      return errorResponse(404, "precondition", `unknown paper ${paper}`);
    }
    if (body.revision !== this.revision) {
      return errorResponse(409, "stale_revision", "project changed since you loaded it", {
        expected: this.revision,
        got: body.revision,
      });
    }
    const state = body.state;
    if (state !== "relevant" && state !== "irrelevant") {
      return errorResponse(400, "vote", "state must be 'relevant' or 'irrelevant'");
    }
    const criteria = body.criteria;
    if (!Array.isArray(criteria) || criteria.some((c) => typeof c !== "string")) {
      return errorResponse(400, "vote", "criteria must be a list of criterion ids");
    }
    const known = new Set(this.config.criteria.map((c) => c.id));
    const unknown = criteria.filter((c) => !known.has(c));
    if (unknown.length > 0) {
      return errorResponse(400, "vote", `unknown criteria: ${unknown.join(", ")}`);
    }
    if (state === "irrelevant" && criteria.length === 0) {
      return errorResponse(
        400,
        "vote",
        "excluding a paper requires at least one exclusion criterion",
      );
    }
    if (this.stateOf(paper) !== "to_decide") {
      return errorResponse(409, "precondition", `paper ${paper} is already decided`);
    }
    this.clock += 1;
    const decision: StoredDecision = {
      paper,
      state,
      decided_by: caller.role === "moderator" ? "moderator" : "workshop",
      criteria_applied: criteria as string[],
      timestamp: `2026-08-16T00:01:${String(this.clock % 60).padStart(2, "0")}Z`,
    };
    this.decisions.push(decision);
    return ok({ decision, revision: this.revision });
  }

  private listRecords(query: QueryParams | undefined): TransportResponse {
    const stateFilter = query?.state as RelevanceState | undefined;
    if (
      stateFilter !== undefined &&
      !["relevant", "irrelevant", "to_decide"].includes(stateFilter)
    ) {
      return errorResponse(400, "precondition", `unknown state ${stateFilter}`);
    }
    const page = query?.page === undefined ? 1 : Number(query.page);
    const pageSize = query?.page_size === undefined ? 50 : Number(query.page_size);
    if (page < 1) {
      return errorResponse(400, "precondition", "page starts at 1");
    }
    if (pageSize < 1 || pageSize > 500) {
      return errorResponse(400, "precondition", "page_size must be between 1 and 500");
    }
    const summaries = this.config.papers
      .map((p) => this.summaryOf(p))
      .filter((s) => stateFilter === undefined || s.state === stateFilter);
    const start = (page - 1) * pageSize;
    return ok({
      total: summaries.length,
      page,
      page_size: pageSize,
      pages: Math.max(1, Math.ceil(summaries.length / pageSize)),
      records: summaries.slice(start, start + pageSize),
    });
  }

  async request(req: TransportRequest): Promise<TransportResponse> {
    if (this.failNextRequests > 0) {
      this.failNextRequests -= 1;
      throw new NetworkError("connection refused");
    }
    this.log.push({ method: req.method, path: req.path });
    const caller = this.config.reviewers.find((r) => r.token === req.token);
    if (!caller) {
      return errorResponse(401, "unknown_reviewer", "bearer token does not match any reviewer");
    }
    if (req.method === "GET" && req.path === "/project") {
      return ok(this.projectBody(caller));
    }
    if (req.method === "GET" && req.path === "/records") {
      return this.listRecords(req.query);
    }
    if (req.method === "GET" && req.path.startsWith("/records/")) {
      const id = decodeURIComponent(req.path.slice("/records/".length));
      const paper = this.config.papers.find((p) => p.id === id);
      if (!paper) {
        return errorResponse(404, "precondition", `unknown paper ${id}`);
      }
      return ok(this.detailOf(paper, caller));
    }
    if (req.method === "GET" && req.path === "/worklist") {
      return ok({
        reviewer: caller.id,
        round: this.requiredRound(caller.id),
        papers: this.worklistFor(caller.id),
      });
    }
    if (req.method === "GET" && req.path === "/agreement") {
      const method = (req.query?.method as string | undefined) ?? "cohen_kappa";
      return this.agreementReport(method);
    }
    if (req.method === "GET" && req.path === "/funnel") {
      const databases = [...new Set(this.config.papers.map((p) => this.summaryOf(p).database))];
      return ok({
        funnel: {
          databases,
          sections: [
            {
              title: "Step 1: Search",
              rows: [
                {
                  label: "imported",
                  cells: Object.fromEntries(
                    databases.map((db) => [
                      db,
                      this.config.papers.filter((p) => this.summaryOf(p).database === db).length,
                    ]),
                  ),
                  total: this.config.papers.length,
                },
              ],
            },
          ],
        },
        text: "funnel",
      });
    }
    if (req.method === "POST" && req.path === "/votes") {
      return this.castVote(caller, req.body as Record<string, unknown>);
    }
    if (req.method === "POST" && req.path === "/decisions") {
      return this.recordDecision(caller, req.body as Record<string, unknown>);
    }
    return errorResponse(404, "precondition", `no route for ${req.method} ${req.path}`);
  }
}
