/**
 * Screening queue: the reviewer's server-assigned worklist plus the vote
 * submission flow.
 *
 * The queue holds no truth of its own. Its paper list is exactly the
 * server's worklist at the last refresh, and it advances to the next paper
 * only when the server has accepted a vote. A rejected vote leaves the
 * queue where it was and surfaces the error; a vote that could not reach
 * the server at all is parked locally and retried on the next keystroke,
 * never dropped.
 */

import { ApiError, NetworkError, ReviewApi } from "./api.js";
import type { ScreeningAction } from "./keyboard.js";

export interface Progress {
  voted: number;
  remaining: number;
  assigned: number;
}

export type VoteOutcome =
  | { kind: "accepted"; paper: string; value: number }
  | { kind: "rejected"; paper: string; error: ApiError }
  | { kind: "parked"; paper: string }
  | { kind: "superseded"; paper: string }
  | { kind: "empty" };

interface ParkedVote {
  paper: string;
  value: number;
}

export class ScreeningQueue {
  private readonly api: ReviewApi;
  private papers: string[] = [];
  private round = 1;
  private revision = 0;
  private acceptedCount = 0;
  private parkedVote: ParkedVote | null = null;

  constructor(api: ReviewApi) {
    this.api = api;
  }

  /** Reload the worklist and revision from the server. */
  async refresh(): Promise<void> {
    const project = await this.api.project();
    this.revision = project.revision;
    const worklist = await this.api.worklist();
    this.papers = [...worklist.papers];
    this.round = worklist.round;
  }

  current(): string | null {
    return this.papers.length > 0 ? this.papers[0] : null;
  }

  currentRound(): number {
    return this.round;
  }

  parked(): ParkedVote | null {
    return this.parkedVote;
  }

  progress(): Progress {
    const remaining = this.papers.length;
    return {
      voted: this.acceptedCount,
      remaining,
      assigned: this.acceptedCount + remaining,
    };
  }

  /**
   * Cast a vote on the current paper. If a parked vote is pending it is
   * retried first; the new value is discarded because the queue has not
   * moved, so the keystroke refers to the same paper the parked vote does.
   */
  async vote(value: number): Promise<VoteOutcome> {
    if (this.parkedVote) {
      return this.retryParked();
    }
    const paper = this.current();
    if (paper === null) {
      return { kind: "empty" };
    }
    return this.submit(paper, value, true);
  }

  /** Resubmit the parked vote, if any. */
  async retryParked(): Promise<VoteOutcome> {
    if (!this.parkedVote) {
      return { kind: "empty" };
    }
    const { paper, value } = this.parkedVote;
    this.parkedVote = null;
    return this.submit(paper, value, true);
  }

  private async submit(paper: string, value: number, retryOnConflict: boolean): Promise<VoteOutcome> {
    try {
      const accepted = await this.api.castVote(paper, value, this.revision, this.round);
      this.revision = accepted.revision;
      this.acceptedCount += 1;
      if (this.papers[0] === paper) {
        this.papers.shift();
      }
      return { kind: "accepted", paper, value };
    } catch (err) {
      if (err instanceof NetworkError) {
        this.parkedVote = { paper, value };
        return { kind: "parked", paper };
      }
      if (err instanceof ApiError && err.code === "stale_revision" && retryOnConflict) {
        await this.refresh();
        if (this.current() !== paper) {
          return { kind: "superseded", paper };
        }
        return this.submit(paper, value, false);
      }
      if (err instanceof ApiError) {
        return { kind: "rejected", paper, error: err };
      }
      throw err;
    }
  }
}

/**
 * Serialises keystrokes into an ordered stream of queue operations so two
 * fast keystrokes cannot race each other's vote submissions.
 */
export class ScreeningController {
  private readonly queue: ScreeningQueue;
  private chain: Promise<void> = Promise.resolve();
  readonly outcomes: VoteOutcome[] = [];

  constructor(queue: ScreeningQueue) {
    this.queue = queue;
  }

  handle(action: ScreeningAction): void {
    if (action.kind === "vote") {
      this.enqueue(() => this.queue.vote(action.value));
    } else if (action.kind === "retry") {
      this.enqueue(() => this.queue.retryParked());
    }
    // next/previous only move the reading position in the view; they never
    // touch the server and are handled by the rendering layer.
  }

  private enqueue(step: () => Promise<VoteOutcome>): void {
    this.chain = this.chain.then(async () => {
      const outcome = await step();
      if (outcome.kind !== "empty") {
        this.outcomes.push(outcome);
      }
    });
  }

  /** Wait for every queued keystroke to finish. */
  flush(): Promise<void> {
    return this.chain;
  }
}
