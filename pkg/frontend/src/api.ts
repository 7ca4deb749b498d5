/**
 * Typed client for the annotation service JSON API under /api/v1.
 *
 * The fetch implementation is injectable so tests can run without a
 * network; a 409 is surfaced as ConflictError so the caller can refresh
 * its batch non-destructively instead of failing.
 */

import type {
  BatchPayload,
  Candidate,
  MetricsPayload,
  Mode,
  SessionHandle,
  SpanLabel,
} from "./types.js";

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

/** Non-2xx response other than a revision conflict. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** 409: the session moved on; refresh the batch and retry. */
export class ConflictError extends ApiError {
  constructor(message: string) {
    super(409, message);
    this.name = "ConflictError";
  }
}

export interface CreateSessionOptions {
  corpusPath: string;
  entityClass: string;
  format?: string;
  mode?: Mode;
  batchSize?: number;
  n?: number;
  threshold?: number | null;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) =>
      fetch(input, init),
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}/api/v1${path}`, {
      method,
      headers: body !== undefined ? { "Content-Type": "application/json" } : {},
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (response.status === 409) {
      throw new ConflictError(await response.text());
    }
    if (!response.ok) {
      throw new ApiError(response.status, await response.text());
    }
    return (await response.json()) as T;
  }

  createSession(options: CreateSessionOptions): Promise<SessionHandle> {
    return this.request("POST", "/sessions", {
      corpus_path: options.corpusPath,
      entity_class: options.entityClass,
      format: options.format ?? "conll2003",
      mode: options.mode ?? "EAL",
      batch_size: options.batchSize ?? 100,
      n: options.n ?? 10,
      threshold: options.threshold ?? null,
    });
  }

  getBatch(sessionId: string): Promise<BatchPayload> {
    return this.request("GET", `/sessions/${sessionId}/batch`);
  }

  submitLabels(
    sessionId: string,
    revision: number,
    spans: SpanLabel[],
  ): Promise<{ revision: number; metrics: MetricsPayload["history"][number] }> {
    return this.request("POST", `/sessions/${sessionId}/labels`, {
      revision,
      spans,
    });
  }

  expandSeed(
    sessionId: string,
    seed: string,
  ): Promise<{ revision: number; candidates: Candidate[] }> {
    return this.request("POST", `/sessions/${sessionId}/expand`, { seed });
  }

  confirmCandidates(
    sessionId: string,
    revision: number,
    surfaces: string[],
  ): Promise<BatchPayload> {
    return this.request("POST", `/sessions/${sessionId}/confirm`, {
      revision,
      surfaces,
    });
  }

  getMetrics(sessionId: string): Promise<MetricsPayload> {
    return this.request("GET", `/sessions/${sessionId}/metrics`);
  }

  async exportAnnotations(
    sessionId: string,
    scheme: "bio" | "io" = "bio",
  ): Promise<string> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/api/v1/sessions/${sessionId}/annotations?scheme=${scheme}`,
      { method: "GET" },
    );
    if (!response.ok) {
      throw new ApiError(response.status, await response.text());
    }
    return response.text();
  }
}
