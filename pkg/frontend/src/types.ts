/**
 * Wire-level types for the screening service's JSON API.
 *
 * These mirror the response shapes of the HTTP endpoints exactly; the UI
 * never adds fields of its own to them. Anything the interface displays is
 * derived from values carried by one of these bodies.
 */

export type RelevanceState = "relevant" | "irrelevant" | "to_decide";

export type ItemStatus = "agree_include" | "agree_exclude" | "disagree";

export interface ErrorBody {
  code: string;
  message: string;
  details: Record<string, unknown>;
}

export interface ScaleInfo {
  kind: string;
  lo: number;
  hi: number;
  neutral: number | null;
}

export interface CriterionInfo {
  id: string;
  kind: string;
  text: string;
}

export interface ReviewerInfo {
  id: string;
  role: string;
}

export interface ProjectCounts {
  papers: number;
  votes: number;
  decided_records: number | null;
  undecided: number;
}

export interface ProjectSummary {
  name: string;
  revision: number;
  baseline_revision: number | null;
  workflow: string;
  scale: ScaleInfo;
  threshold: number;
  aggregator: string;
  vote_exclusion_criteria: string[];
  research_questions: string[];
  sources: string[];
  criteria: CriterionInfo[];
  reviewers: ReviewerInfo[];
  you: ReviewerInfo;
  counts: ProjectCounts;
}

export interface RecordSummary {
  no: string;
  db_no: number;
  title: string;
  authors: string[];
  year: number | null;
  source_venue: string;
  publication_vehicle: string;
  database: string;
  state: RelevanceState;
  decided_by: string | null;
}

export interface RecordDetail extends RecordSummary {
  keywords: string[];
  abstract: string;
  publisher_database: string;
  general_comments: string;
  metadata: Record<string, string>;
  full_text_available: boolean;
  completion_flags: string[];
  criteria_applied: string[];
  your_vote: number | null;
  your_round: number | null;
}

export interface VoteBody {
  reviewer: string;
  paper: string;
  value: number;
  round: number;
  timestamp: string;
}

export interface RecordDetailResponse {
  record: RecordDetail;
  criteria: CriterionInfo[];
  /** Present only when the caller holds the moderator role. */
  votes?: VoteBody[];
}

export interface RecordPage {
  total: number;
  page: number;
  page_size: number;
  pages: number;
  records: RecordSummary[];
}

export interface WorklistResponse {
  reviewer: string;
  round: number;
  papers: string[];
}

export interface AgreementStratum {
  n_raters: number;
  n_items: number;
  value: number | null;
  degenerate: boolean;
}

export interface AgreementReportBody {
  method: string;
  value: number | null;
  n_items: number;
  n_raters: number;
  degenerate: boolean;
  per_item_status: Record<string, ItemStatus>;
  strata: AgreementStratum[];
}

export interface VoteAccepted {
  accepted: boolean;
  vote: VoteBody;
  revision: number;
}

export interface DecisionBody {
  paper: string;
  state: RelevanceState;
  decided_by: string;
  criteria_applied: string[];
  timestamp: string;
}

export interface DecisionAccepted {
  decision: DecisionBody;
  revision: number;
}

export interface FunnelRowBody {
  label: string;
  cells: Record<string, number | null>;
  total: number;
}

export interface FunnelSectionBody {
  title: string;
  rows: FunnelRowBody[];
}

export interface FunnelDoc {
  databases: string[];
  sections: FunnelSectionBody[];
}

export interface FunnelResponse {
  funnel: FunnelDoc;
  text: string;
}
