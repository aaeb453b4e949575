/**
 * Workshop mode: the moderator walks the undecided papers with every
 * reviewer's votes side by side and settles each one.
 *
 * Excluding a paper requires naming at least one exclusion criterion. The
 * panel refuses to send a criterion-less exclusion at all, and the server
 * independently rejects one that arrives anyway, so the rule holds even if
 * a client bypasses the panel.
 */

import { ApiError, ReviewApi } from "./api.js";
import type { CriterionInfo, DecisionBody, VoteBody } from "./types.js";

export const EXCLUSION_NEEDS_CRITERION =
  "excluding a paper requires at least one exclusion criterion";

export interface DecisionDraft {
  paper: string;
  state: "relevant" | "irrelevant";
  criteria: string[];
}

/** Client-side gate; returns the blocking reason or null when sendable. */
export function validateDecision(draft: DecisionDraft): string | null {
  if (draft.state === "irrelevant" && draft.criteria.length === 0) {
    return EXCLUSION_NEEDS_CRITERION;
  }
  return null;
}

export interface WorkshopItem {
  paper: string;
  title: string;
  votes: VoteBody[];
}

export type DecisionOutcome =
  | { kind: "recorded"; decision: DecisionBody }
  | { kind: "blocked"; reason: string }
  | { kind: "rejected"; error: ApiError };

export class WorkshopPanel {
  private readonly api: ReviewApi;
  private revision = 0;
  private items: WorkshopItem[] = [];
  private catalog: CriterionInfo[] = [];

  constructor(api: ReviewApi) {
    this.api = api;
  }

  /** Reload the undecided papers and their votes from the server. */
  async refresh(): Promise<void> {
    const project = await this.api.project();
    this.revision = project.revision;
    this.catalog = project.criteria;
    const page = await this.api.records("to_decide", 1, 500);
    const items: WorkshopItem[] = [];
    for (const summary of page.records) {
      const detail = await this.api.record(summary.no);
      items.push({
        paper: summary.no,
        title: summary.title,
        votes: detail.votes ?? [],
      });
    }
    this.items = items;
  }

  undecided(): WorkshopItem[] {
    return [...this.items];
  }

  isEmpty(): boolean {
    return this.items.length === 0;
  }

  criteria(): CriterionInfo[] {
    return [...this.catalog];
  }

  /**
   * Record one decision. Invalid drafts are blocked before any request is
   * made; a stale revision is resolved by refetching and retrying once.
   */
  async decide(draft: DecisionDraft, retryOnConflict = true): Promise<DecisionOutcome> {
    const reason = validateDecision(draft);
    if (reason !== null) {
      return { kind: "blocked", reason };
    }
    try {
      const accepted = await this.api.recordDecision(
        draft.paper,
        draft.state,
        draft.criteria,
        this.revision,
      );
      this.revision = accepted.revision;
      this.items = this.items.filter((item) => item.paper !== draft.paper);
      return { kind: "recorded", decision: accepted.decision };
    } catch (err) {
      if (err instanceof ApiError && err.code === "stale_revision" && retryOnConflict) {
        await this.refresh();
        if (!this.items.some((item) => item.paper === draft.paper)) {
          return {
            kind: "blocked",
            reason: `paper ${draft.paper} is no longer undecided`,
          };
        }
        return this.decide(draft, false);
      }
      if (err instanceof ApiError) {
        return { kind: "rejected", error: err };
      }
      throw err;
    }
  }
}
