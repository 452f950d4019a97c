import type { RunDoc, RunListEntry } from "./types.js";

/** A failed API call; status is null when the server was unreachable. */
export class ApiError extends Error {
  constructor(message: string, readonly status: number | null = null) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/**
 * Thin client for the serve-mode endpoints. A fetch implementation can be
 * injected for tests; responses are returned as parsed documents without
 * any transformation.
 */
export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(`server unreachable: ${String(err)}`, null);
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // keep the status text
      }
      throw new ApiError(detail, response.status);
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, payload?: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: payload === undefined ? "{}" : JSON.stringify(payload),
    });
  }

  async listRuns(): Promise<RunListEntry[]> {
    const body = await this.request<{ runs: RunListEntry[] }>("/runs");
    return body.runs;
  }

  getRun(id: string): Promise<RunDoc> {
    return this.request<RunDoc>(`/runs/${encodeURIComponent(id)}`);
  }

  setLeafScore(id: string, leafRef: string, score: number): Promise<RunDoc> {
    return this.post<RunDoc>(
      `/runs/${encodeURIComponent(id)}/leaves/${encodeURIComponent(leafRef)}/score`,
      { score },
    );
  }

  setPruned(id: string, nodeRef: string, pruned: boolean): Promise<RunDoc> {
    return this.post<RunDoc>(
      `/runs/${encodeURIComponent(id)}/nodes/${encodeURIComponent(nodeRef)}/prune`,
      { pruned },
    );
  }

  repropagate(id: string): Promise<RunDoc> {
    return this.post<RunDoc>(`/runs/${encodeURIComponent(id)}/repropagate`);
  }

  rescore(id: string): Promise<RunDoc> {
    return this.post<RunDoc>(`/runs/${encodeURIComponent(id)}/rescore`);
  }
}
