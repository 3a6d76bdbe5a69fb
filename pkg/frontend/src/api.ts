/** Thin fetch client for the `/v1` API. Errors carry the server's
 * `{code, message, details}` body so the UI can show exact causes. */

import type {
  ApiErrorBody,
  CreateSessionRequest,
  SearchResult,
  SessionView,
  StepAction,
} from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public details: Record<string, unknown> = {},
  ) {
    super(message);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (response.status === 204) return undefined as T;
    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      body = null;
    }
    if (!response.ok) {
      const err = (body ?? {}) as Partial<ApiErrorBody>;
      throw new ApiError(
        response.status,
        err.code ?? "unknown_error",
        err.message ?? `request failed with status ${response.status}`,
        err.details ?? {},
      );
    }
    return body as T;
  }

  createSession(req: CreateSessionRequest): Promise<SessionView> {
    return this.request("/v1/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request(`/v1/sessions/${sessionId}`);
  }

  step(sessionId: string, action: StepAction, expectedVersion: number): Promise<SessionView> {
    return this.request(`/v1/sessions/${sessionId}/step`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ ...action, expected_version: expectedVersion }),
    });
  }

  deleteSession(sessionId: string): Promise<void> {
    return this.request(`/v1/sessions/${sessionId}`, { method: "DELETE" });
  }

  async searchItems(text: string, type?: string, limit = 10): Promise<SearchResult[]> {
    const params = new URLSearchParams({ text, limit: String(limit) });
    if (type) params.set("type", type);
    const body = await this.request<{ results: SearchResult[] }>(
      `/v1/items/search?${params}`,
    );
    return body.results;
  }

  health(): Promise<{ status: string; types: string[] }> {
    return this.request("/v1/health");
  }

  itemImageUrl(itemId: string): string {
    return `${this.baseUrl}/v1/items/${itemId}/image`;
  }

  sessionBoardUrl(sessionId: string): string {
    return `${this.baseUrl}/v1/sessions/${sessionId}/board`;
  }
}
