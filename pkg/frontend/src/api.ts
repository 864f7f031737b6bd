import type {
  CollectionInfo,
  FeedbackPayload,
  ItemFeatures,
  SessionParams,
  SuggestionsPayload,
} from "./types.js";

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/**
 * Thin typed client over the JSON API. Requests for one session are
 * chained so at most one is in flight at a time, mirroring the server's
 * per-session serialization.
 */
export class ApiClient {
  private queues = new Map<string, Promise<unknown>>();

  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ApiError(0, `network error: ${String(err)}`);
    }
    if (!response.ok) {
      let detail = `${response.status}`;
      try {
        const body = await response.json();
        detail = typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail ?? body);
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(response.status, detail);
    }
    if (response.status === 204) {
      return undefined as T;
    }
    return (await response.json()) as T;
  }

  /** Serialize calls that share a session id. */
  private enqueue<T>(sessionId: string, job: () => Promise<T>): Promise<T> {
    const prev = this.queues.get(sessionId) ?? Promise.resolve();
    const next = prev.then(job, job);
    this.queues.set(sessionId, next.catch(() => undefined));
    return next;
  }

  listCollections(): Promise<CollectionInfo[]> {
    return this.request("/collections");
  }

  getCollection(id: string): Promise<CollectionInfo> {
    return this.request(`/collections/${id}`);
  }

  itemFeatures(collectionId: string, itemId: number): Promise<ItemFeatures> {
    return this.request(`/collections/${collectionId}/features/${itemId}`);
  }

  createSession(body: {
    collection_id: string;
    seed?: number;
    params?: Partial<SessionParams>;
    preseed?: { positives: number[]; negatives: number[] };
  }): Promise<{ id: string }> {
    return this.request("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  suggestions(sessionId: string): Promise<SuggestionsPayload> {
    return this.enqueue(sessionId, () => this.request(`/sessions/${sessionId}/suggestions`));
  }

  feedback(sessionId: string, payload: FeedbackPayload): Promise<void> {
    return this.enqueue(sessionId, () =>
      this.request(`/sessions/${sessionId}/feedback`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(payload),
      }),
    );
  }

  updateParams(sessionId: string, params: Partial<SessionParams>): Promise<{ params: SessionParams }> {
    return this.enqueue(sessionId, () =>
      this.request(`/sessions/${sessionId}/params`, {
        method: "PATCH",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(params),
      }),
    );
  }

  stats(sessionId: string): Promise<unknown[]> {
    return this.request(`/sessions/${sessionId}/stats`);
  }
}
