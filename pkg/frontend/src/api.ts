/**
 * Typed client for the screening service.
 *
 * All traffic goes through a Transport so the client works the same against
 * a live server (FetchTransport) and an in-process fake in the tests. The
 * client carries no state beyond the token; every answer comes from the
 * server on every call.
 */

import type {
  AgreementReportBody,
  DecisionAccepted,
  ErrorBody,
  FunnelResponse,
  ProjectSummary,
  RecordDetailResponse,
  RecordPage,
  RelevanceState,
  VoteAccepted,
  WorklistResponse,
} from "./types.js";

export type QueryParams = Record<string, string | number | undefined>;

export interface TransportRequest {
  method: "GET" | "POST";
  path: string;
  query?: QueryParams;
  body?: unknown;
  token: string;
}

export interface TransportResponse {
  status: number;
  body: unknown;
}

export interface Transport {
  request(req: TransportRequest): Promise<TransportResponse>;
}

/** The server answered with an error body (status >= 400). */
export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly details: Record<string, unknown>;

  constructor(status: number, body: ErrorBody) {
    super(body.message);
    this.name = "ApiError";
    this.status = status;
    this.code = body.code;
    this.details = body.details ?? {};
  }
}

/** The request never produced a response (connection refused, timeout, ...). */
export class NetworkError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "NetworkError";
  }
}

export function buildUrl(baseUrl: string, path: string, query?: QueryParams): string {
  const base = baseUrl.endsWith("/") ? baseUrl.slice(0, -1) : baseUrl;
  let url = base + path;
  if (query) {
    const params = new URLSearchParams();
    for (const [key, value] of Object.entries(query)) {
      if (value !== undefined) {
        params.set(key, String(value));
      }
    }
    const encoded = params.toString();
    if (encoded) {
      url += "?" + encoded;
    }
  }
  return url;
}

/** Transport backed by the global fetch. */
export class FetchTransport implements Transport {
  private readonly baseUrl: string;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl;
  }

  async request(req: TransportRequest): Promise<TransportResponse> {
    const url = buildUrl(this.baseUrl, req.path, req.query);
    const headers: Record<string, string> = {
      Authorization: `Bearer ${req.token}`,
    };
    const init: RequestInit = { method: req.method, headers };
    if (req.body !== undefined) {
      headers["Content-Type"] = "application/json";
      init.body = JSON.stringify(req.body);
    }
    let response: Response;
    try {
      response = await fetch(url, init);
    } catch (err) {
      throw new NetworkError(err instanceof Error ? err.message : String(err));
    }
    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      body = null;
    }
    return { status: response.status, body };
  }
}

function asErrorBody(status: number, body: unknown): ErrorBody {
  if (body && typeof body === "object" && "code" in body && "message" in body) {
    return body as ErrorBody;
  }
  return { code: "unknown", message: `request failed with status ${status}`, details: {} };
}

export class ReviewApi {
  private readonly transport: Transport;
  private readonly token: string;

  constructor(transport: Transport, token: string) {
    this.transport = transport;
    this.token = token;
  }

  private async call<T>(method: "GET" | "POST", path: string, query?: QueryParams, body?: unknown): Promise<T> {
    const response = await this.transport.request({ method, path, query, body, token: this.token });
    if (response.status >= 400) {
      throw new ApiError(response.status, asErrorBody(response.status, response.body));
    }
    return response.body as T;
  }

  project(): Promise<ProjectSummary> {
    return this.call<ProjectSummary>("GET", "/project");
  }

  records(state?: RelevanceState, page = 1, pageSize = 50): Promise<RecordPage> {
    return this.call<RecordPage>("GET", "/records", {
      state,
      page,
      page_size: pageSize,
    });
  }

  record(id: string): Promise<RecordDetailResponse> {
    return this.call<RecordDetailResponse>("GET", `/records/${encodeURIComponent(id)}`);
  }

  worklist(): Promise<WorklistResponse> {
    return this.call<WorklistResponse>("GET", "/worklist");
  }

  agreement(method = "cohen_kappa", weighting = "linear"): Promise<AgreementReportBody> {
    return this.call<AgreementReportBody>("GET", "/agreement", { method, weighting });
  }

  funnel(): Promise<FunnelResponse> {
    return this.call<FunnelResponse>("GET", "/funnel");
  }

  castVote(paper: string, value: number, revision: number, round?: number): Promise<VoteAccepted> {
    const body: Record<string, unknown> = { paper, revision, value };
    if (round !== undefined) {
      body.round = round;
    }
    return this.call<VoteAccepted>("POST", "/votes", undefined, body);
  }

  recordDecision(
    paper: string,
    state: "relevant" | "irrelevant",
    criteria: string[],
    revision: number,
  ): Promise<DecisionAccepted> {
    return this.call<DecisionAccepted>("POST", "/decisions", undefined, {
      paper,
      revision,
      state,
      criteria,
    });
  }
}
