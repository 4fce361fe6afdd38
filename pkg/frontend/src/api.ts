/** Typed client for the annotation service HTTP/JSON API. */

export interface FlameConfigInput {
  shots_k?: number;
  pca_dim?: number;
  bandwidth?: number | null;
  ratio_lower?: number;
  ratio_upper?: number;
  imbalance_threshold?: number;
  smote_neighbors?: number;
  jitter_sigma?: number;
  seed?: number;
  similarity_floor?: number | null;
  kernel?: string;
  gamma?: number | null;
  svm_c?: number;
}

export interface Candidate {
  shot_id: string;
  similarity: number;
  density: number;
  cluster_id: number;
  distance_to_center: number;
  image_ref: string | null;
  preview: [number, number] | null;
}

export interface SessionCreated {
  session_id: string;
  status: string;
  shot_count: number;
  effective_k: number;
}

export interface TrainReport {
  session_id: string;
  labeled: number;
  ap_flame: number | null;
  ap_baseline: number | null;
  average_precision?: number;
  baseline_ap?: number | null;
  curve?: Array<[number, number]>;
  true_positives?: number;
  false_positives?: number;
  false_negatives?: number;
  post_labeling_seconds?: number;
}

export interface SessionSummary {
  session_id: string;
  status: string;
  shot_count: number;
  labeled_count: number;
  config: Record<string, unknown>;
  report: TrainReport | null;
}

export interface CandidatesPayload {
  session_id: string;
  candidates: Candidate[];
  labels: Record<string, 0 | 1>;
}

export interface SubmitResult {
  accepted: number;
  remaining: number;
}

/** Service error with the {code, message, details} payload attached. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly details: Record<string, unknown> = {},
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class FlameClient {
  private readonly fetchImpl: FetchLike;

  constructor(
    readonly baseUrl: string,
    fetchImpl?: FetchLike,
  ) {
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchImpl(`${this.baseUrl}${path}`, {
        method,
        headers: body === undefined ? undefined : { "content-type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(0, "network_error", `service unreachable: ${String(err)}`);
    }
    const text = await resp.text();
    let doc: unknown = null;
    if (text) {
      try {
        doc = JSON.parse(text);
      } catch {
        doc = null;
      }
    }
    if (!resp.ok) {
      const payload = (doc ?? {}) as {
        code?: string;
        message?: string;
        details?: Record<string, unknown>;
      };
      throw new ApiError(
        resp.status,
        payload.code ?? "http_error",
        payload.message ?? `HTTP ${resp.status}`,
        payload.details ?? {},
      );
    }
    return doc as T;
  }

  createSession(
    poolPath: string,
    queryPath: string,
    config: FlameConfigInput = {},
  ): Promise<SessionCreated> {
    return this.request<SessionCreated>("POST", "/sessions", {
      pool_path: poolPath,
      query_path: queryPath,
      config,
    });
  }

  getSession(sessionId: string): Promise<SessionSummary> {
    return this.request<SessionSummary>("GET", `/sessions/${sessionId}`);
  }

  getCandidates(sessionId: string): Promise<CandidatesPayload> {
    return this.request<CandidatesPayload>("GET", `/sessions/${sessionId}/candidates`);
  }

  submitLabels(
    sessionId: string,
    labels: Record<string, 0 | 1>,
  ): Promise<SubmitResult> {
    return this.request<SubmitResult>("POST", `/sessions/${sessionId}/labels`, { labels });
  }

  train(sessionId: string, allowPartial = false): Promise<TrainReport> {
    return this.request<TrainReport>("POST", `/sessions/${sessionId}/train`, {
      allow_partial: allowPartial,
    });
  }

  getReport(sessionId: string): Promise<TrainReport> {
    return this.request<TrainReport>("GET", `/sessions/${sessionId}/report`);
  }

  assetUrl(imageRef: string): string {
    return `${this.baseUrl}/assets/${imageRef}`;
  }
}
