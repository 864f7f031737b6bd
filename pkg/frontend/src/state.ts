import { ApiClient } from "./api.js";
import type {
  CollectionInfo,
  FeedbackPayload,
  GridItem,
  LabelState,
  RoundStats,
  SessionParams,
  SuggestionsPayload,
} from "./types.js";

const LABEL_CYCLE: Record<LabelState, LabelState> = {
  unmarked: "relevant",
  relevant: "not_relevant",
  not_relevant: "unmarked",
};

export type ControllerEvent = "grid" | "stats" | "banner" | "busy";

/**
 * Session view state machine, independent of the DOM. Rendering layers
 * subscribe to change events; tests drive it directly.
 *
 * Guarantees: the submitted payload is exactly the marked items, a
 * suggestion id never appears twice within the session, and while a
 * request is in flight at most one submit is queued.
 */
export class SessionController {
  grid: GridItem[] = [];
  round = 0;
  lastStats: RoundStats | null = null;
  banner: string | null = null;
  busy = false;
  history: number[][] = [];
  readonly seenIds = new Set<number>();
  params: SessionParams;

  private pendingSubmit: { skip: boolean } | null = null;
  private listeners = new Map<ControllerEvent, Set<() => void>>();

  constructor(
    private readonly api: ApiClient,
    readonly sessionId: string,
    readonly collection: CollectionInfo,
    params: SessionParams,
  ) {
    this.params = { ...params };
  }

  static async start(
    api: ApiClient,
    collection: CollectionInfo,
    options: {
      seed?: number;
      params?: Partial<SessionParams>;
      preseed?: { positives: number[]; negatives: number[] };
    } = {},
  ): Promise<SessionController> {
    const params: SessionParams = {
      k: 25, r: 100, b: 64, w: 1, s_c: 1, s_m: null,
      ...options.params,
    };
    const created = await api.createSession({
      collection_id: collection.id,
      seed: options.seed ?? 0,
      params,
      preseed: options.preseed,
    });
    const controller = new SessionController(api, created.id, collection, params);
    await controller.refreshSuggestions();
    return controller;
  }

  on(event: ControllerEvent, handler: () => void): void {
    if (!this.listeners.has(event)) {
      this.listeners.set(event, new Set());
    }
    this.listeners.get(event)!.add(handler);
  }

  private emit(event: ControllerEvent): void {
    for (const handler of this.listeners.get(event) ?? []) {
      handler();
    }
  }

  /** Cycle unmarked -> relevant -> not_relevant -> unmarked. */
  toggleLabel(itemId: number): GridItem {
    const item = this.grid.find((g) => g.id === itemId);
    if (!item) {
      throw new Error(`item ${itemId} is not on the grid`);
    }
    item.labelState = LABEL_CYCLE[item.labelState];
    this.emit("grid");
    return item;
  }

  markedPayload(): FeedbackPayload {
    return {
      relevant: this.grid.filter((g) => g.labelState === "relevant").map((g) => g.id),
      not_relevant: this.grid.filter((g) => g.labelState === "not_relevant").map((g) => g.id),
    };
  }

  markedCount(): number {
    return this.grid.filter((g) => g.labelState !== "unmarked").length;
  }

  /** Submit needs at least one mark; skipping a round never does. */
  canSubmit(): boolean {
    return this.markedCount() > 0;
  }

  /**
   * POST the marked labels (or an explicit skip) and pull the next
   * round. While a request runs, one submit is queued at most; errors
   * raise the banner and leave the grid and marks untouched.
   */
  async submitRound(options: { skip?: boolean } = {}): Promise<boolean> {
    const skip = options.skip ?? false;
    if (!skip && !this.canSubmit()) {
      return false;
    }
    if (this.busy) {
      if (!this.pendingSubmit) {
        this.pendingSubmit = { skip };
      }
      return false;
    }
    this.setBusy(true);
    try {
      const payload = skip ? { relevant: [], not_relevant: [] } : this.markedPayload();
      await this.api.feedback(this.sessionId, payload);
      const suggestions = await this.api.suggestions(this.sessionId);
      this.applyRound(suggestions);
      this.setBanner(null);
      return true;
    } catch (err) {
      this.setBanner(String(err instanceof Error ? err.message : err));
      return false;
    } finally {
      this.setBusy(false);
      const queued = this.pendingSubmit;
      this.pendingSubmit = null;
      if (queued) {
        void this.submitRound(queued);
      }
    }
  }

  async refreshSuggestions(): Promise<void> {
    this.setBusy(true);
    try {
      this.applyRound(await this.api.suggestions(this.sessionId));
      this.setBanner(null);
    } catch (err) {
      this.setBanner(String(err instanceof Error ? err.message : err));
    } finally {
      this.setBusy(false);
    }
  }

  /** Stage parameter edits; they apply from the next round server-side. */
  async updateParams(edit: Partial<SessionParams>): Promise<boolean> {
    try {
      const result = await this.api.updateParams(this.sessionId, edit);
      this.params = result.params;
      this.setBanner(null);
      this.emit("stats");
      return true;
    } catch (err) {
      this.setBanner(String(err instanceof Error ? err.message : err));
      return false;
    }
  }

  private applyRound(payload: SuggestionsPayload): void {
    if (payload.round === this.round && this.grid.length > 0) {
      return; // cached round replayed, nothing changes
    }
    const repeats = payload.items.filter((item) => this.seenIds.has(item.id));
    if (repeats.length > 0) {
      throw new Error(`server repeated item ids: ${repeats.map((r) => r.id).join(", ")}`);
    }
    for (const item of payload.items) {
      this.seenIds.add(item.id);
    }
    this.history.push(payload.items.map((item) => item.id));
    this.round = payload.round;
    this.lastStats = payload.stats;
    this.grid = payload.items.map((item) => ({
      id: item.id,
      labelState: "unmarked" as LabelState,
      scoreVisual: item.score_visual,
      scoreText: item.score_text,
      avgRank: item.avg_rank,
      thumbnailUrl: this.collection.thumbnail_template
        ? this.collection.thumbnail_template.replace("{id}", String(item.id))
        : null,
    }));
    this.emit("grid");
    this.emit("stats");
  }

  private setBanner(message: string | null): void {
    this.banner = message;
    this.emit("banner");
  }

  private setBusy(value: boolean): void {
    this.busy = value;
    this.emit("busy");
  }
}
