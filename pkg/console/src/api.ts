// Typed client for the /v1 troubleshooting API. All causal math lives
// server-side; this module only moves JSON.

export interface RankedEntry {
  label: string;
  probability: number;
}

export interface SolutionEntry {
  category: string;
  probability: number;
  exemplars: string[];
}

export interface ModelMeta {
  schema_version: number;
  alpha: number;
  seed: number;
  training_records: number;
  fit_timestamp: string;
}

export interface ModelInfo {
  schema_version: number;
  domains: Record<string, number>;
  environments: string[];
  meta: ModelMeta;
}

export interface AdvisoryPayload {
  options: string[];
  raw_generation: string;
  provenance: string;
}

export interface DiagnoseResponse {
  causes: RankedEntry[];
  model_meta: ModelMeta;
}

export interface SolveResponse {
  solutions: SolutionEntry[];
  advisory?: AdvisoryPayload;
  model_meta: ModelMeta;
}

export interface TransportResponse {
  solutions: SolutionEntry[];
  target: string;
  model_meta: ModelMeta;
}

export interface FactualBody {
  z: string;
  c: string;
  o_text: string;
  s_text: string;
}

export interface RecourseRequest {
  factual?: FactualBody;
  record_id?: string;
  alt_text: string;
  mode?: string;
  samples?: number;
  seed?: number;
}

export interface RecourseResponse {
  counterfactual: RankedEntry[];
  factual_solution: string;
  factual_cause: string;
  mode: string;
  samples: number;
  seed: number;
  model_meta: ModelMeta;
}

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly known: string[] = [],
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    } catch (exc) {
      throw new ApiError("unreachable", `service unreachable: ${String(exc)}`);
    }
    const body = await response.json().catch(() => null);
    if (!response.ok) {
      const error = body?.error;
      throw new ApiError(
        error?.code ?? `http_${response.status}`,
        error?.message ?? `request failed with status ${response.status}`,
        error?.known ?? [],
      );
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  getModel(): Promise<ModelInfo> {
    return this.request<ModelInfo>("/v1/model");
  }

  diagnose(text: string, topK?: number): Promise<DiagnoseResponse> {
    return this.post("/v1/diagnose", { text, top_k: topK });
  }

  solve(text: string, opts: { topK?: number; generate?: boolean; kRetrieve?: number } = {}):
      Promise<SolveResponse> {
    return this.post("/v1/solve", {
      text,
      top_k: opts.topK,
      generate: opts.generate ?? false,
      k_retrieve: opts.kRetrieve,
    });
  }

  transport(text: string, targetEnv: string, topK?: number): Promise<TransportResponse> {
    return this.post("/v1/transport", { text, target_env: targetEnv, top_k: topK });
  }

  recourse(request: RecourseRequest): Promise<RecourseResponse> {
    return this.post("/v1/recourse", request);
  }
}
