/** Composer state machine.
 *
 * Server-authoritative: the state is the last `SessionView` plus local
 * selection; every mutation echoes the server version and at most one
 * mutation is in flight per session. A 409 (stale version or completed
 * session) refreshes the snapshot and raises the recovery banner instead
 * of retrying silently.
 */

import { ApiClient, ApiError } from "./api";
import type { CreateSessionRequest, SessionView, StepAction } from "./types";

export const CANDIDATE_PAGE_SIZE = 20;

export interface ComposerState {
  session: SessionView | null;
  pending: boolean;
  error: string | null;
  conflict: boolean; // true when the banner came from a version conflict
  selected: string | null; // locally highlighted candidate
}

export type Listener = (state: ComposerState) => void;

export class ComposerStore {
  private state: ComposerState = {
    session: null,
    pending: false,
    error: null,
    conflict: false,
    selected: null,
  };
  private listeners: Listener[] = [];

  constructor(private api: ApiClient) {}

  get current(): ComposerState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(patch: Partial<ComposerState>) {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  dismissError() {
    this.emit({ error: null, conflict: false });
  }

  select(itemId: string | null) {
    this.emit({ selected: itemId });
  }

  async create(req: CreateSessionRequest): Promise<SessionView | null> {
    return this.run(() => this.api.createSession(req));
  }

  async refresh(): Promise<SessionView | null> {
    const session = this.state.session;
    if (!session) return null;
    return this.run(() => this.api.getSession(session.session_id), { keepError: true });
  }

  /** Attach to an existing session (another tab, a shared link). */
  async refreshFrom(sessionId: string): Promise<SessionView | null> {
    return this.run(() => this.api.getSession(sessionId));
  }

  async step(action: StepAction): Promise<SessionView | null> {
    const session = this.state.session;
    if (!session || this.state.pending) return null;
    return this.run(() =>
      this.api.step(session.session_id, action, session.version),
    );
  }

  auto() {
    return this.step({ action: "auto" });
  }

  pick(itemId: string) {
    return this.step({ action: "choose", item_id: itemId });
  }

  undo() {
    return this.step({ action: "undo" });
  }

  lock(slot: string) {
    return this.step({ action: "lock", slot });
  }

  unlock(slot: string) {
    return this.step({ action: "unlock", slot });
  }

  /** Auto-fill every remaining slot, one confirmed step at a time. */
  async autoComplete(): Promise<SessionView | null> {
    let view = this.state.session;
    while (view && !view.complete) {
      const next = await this.auto();
      if (next === null) break; // error or conflict: stop, banner is up
      view = next;
    }
    return this.state.session;
  }

  private async run(
    call: () => Promise<SessionView>,
    opts: { keepError?: boolean } = {},
  ): Promise<SessionView | null> {
    this.emit({ pending: true, ...(opts.keepError ? {} : { error: null, conflict: false }) });
    try {
      const session = await call();
      this.emit({ pending: false, session, selected: null });
      return session;
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        // stale tab or finished session: refresh state, surface the banner
        const sessionId = this.state.session?.session_id;
        let refreshed: SessionView | null = this.state.session;
        if (sessionId) {
          try {
            refreshed = await this.api.getSession(sessionId);
          } catch {
            refreshed = this.state.session;
          }
        }
        this.emit({
          pending: false,
          session: refreshed,
          conflict: true,
          error:
            error.code === "complete"
              ? "This outfit is already complete."
              : "Someone else updated this session; showing the latest state.",
        });
        return null;
      }
      const message =
        error instanceof ApiError ? `${error.code}: ${error.message}` : String(error);
      this.emit({ pending: false, error: message, conflict: false });
      return null;
    }
  }
}
