import type {
  DrugInfo,
  ExplainResponse,
  Schema,
  SsResponse,
  SuggestResponse,
} from "./types.js";

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`service returned ${status}: ${detail}`);
  }
}

async function readJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = (await resp.json()) as { detail?: unknown };
      if (body.detail !== undefined) detail = String(body.detail);
    } catch {
      // keep the status text when the error body is not JSON
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

/** Thin typed wrapper over the service endpoints; no client-side math. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) =>
      fetch(input, init),
  ) {}

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.fetchImpl(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    }).then((r) => readJson<T>(r));
  }

  getSchema(): Promise<Schema> {
    return this.fetchImpl(this.baseUrl + "/schema").then((r) =>
      readJson<Schema>(r),
    );
  }

  getDrugs(): Promise<DrugInfo[]> {
    return this.fetchImpl(this.baseUrl + "/drugs").then((r) =>
      readJson<DrugInfo[]>(r),
    );
  }

  suggest(features: number[], k: number): Promise<SuggestResponse> {
    return this.post("/suggest", { features, k });
  }

  explain(drugIds: number[], alpha?: number): Promise<ExplainResponse> {
    return this.post("/explain", { drug_ids: drugIds, alpha });
  }

  ss(drugIds: number[], alpha?: number): Promise<SsResponse> {
    return this.post("/ss", { drug_ids: drugIds, alpha });
  }
}
