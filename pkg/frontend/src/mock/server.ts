/** In-process mock of the `/v1` composer API, driven by recorded fixtures.
 *
 * Mirrors the service contract — session versioning, 409 conflicts,
 * candidate ranking shape, trace records — with deterministic fake
 * rankings derived from hashes, so UI flows run with no backend.
 * Plug `mock.fetch` into `ApiClient`.
 */

import type { FetchLike } from "../api";
import type {
  GenerationConfig,
  RankedCandidate,
  SessionView,
  TraceStep,
} from "../types";
import { FIXTURE_ITEMS, FixtureItem } from "./fixtures";

function hash01(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return (h >>> 8) / 0x1000000;
}

interface MockSession {
  view: SessionView;
}

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

function errorResponse(status: number, code: string, message: string,
                       details: Record<string, unknown> = {}): Response {
  return jsonResponse({ code, message, details }, status);
}

export class MockServer {
  readonly items: FixtureItem[];
  readonly types: string[];
  private sessions = new Map<string, MockSession>();
  private counter = 0;

  constructor(items: FixtureItem[] = FIXTURE_ITEMS) {
    this.items = items;
    this.types = [...new Set(items.map((item) => item.semantic_type))].sort();
  }

  readonly fetch: FetchLike = async (url, init) => this.handle(url, init);

  private handle(url: string, init?: RequestInit): Response {
    const method = (init?.method ?? "GET").toUpperCase();
    const parsed = new URL(url, "http://mock");
    const path = parsed.pathname;
    const body = init?.body ? JSON.parse(String(init.body)) : {};

    if (method === "GET" && path === "/v1/health") {
      return jsonResponse({
        status: "ok",
        items: this.items.length,
        outfits: 0,
        types: this.types,
        sessions: this.sessions.size,
      });
    }
    if (method === "POST" && path === "/v1/sessions") {
      return this.createSession(body);
    }
    let match = path.match(/^\/v1\/sessions\/([^/]+)\/step$/);
    if (method === "POST" && match) {
      return this.step(match[1], body);
    }
    match = path.match(/^\/v1\/sessions\/([^/]+)\/board$/);
    if (method === "GET" && match) {
      return this.sessions.has(match[1])
        ? new Response(new Uint8Array([0x89, 0x50, 0x4e, 0x47]), {
            status: 200,
            headers: { "content-type": "image/png" },
          })
        : errorResponse(404, "not_found", `no session '${match[1]}'`);
    }
    match = path.match(/^\/v1\/sessions\/([^/]+)$/);
    if (match && method === "GET") {
      const session = this.sessions.get(match[1]);
      return session
        ? jsonResponse(this.withCandidates(session.view))
        : errorResponse(404, "not_found", `no session '${match[1]}'`);
    }
    if (match && method === "DELETE") {
      if (!this.sessions.delete(match[1])) {
        return errorResponse(404, "not_found", `no session '${match[1]}'`);
      }
      return new Response(null, { status: 204 });
    }
    if (method === "GET" && path === "/v1/items/search") {
      return this.search(parsed.searchParams);
    }
    match = path.match(/^\/v1\/items\/([^/]+)\/image$/);
    if (method === "GET" && match) {
      return new Response(new Uint8Array([0x89, 0x50, 0x4e, 0x47]), {
        status: 200,
        headers: { "content-type": "image/png" },
      });
    }
    match = path.match(/^\/v1\/items\/([^/]+)$/);
    if (method === "GET" && match) {
      const item = this.items.find((it) => it.item_id === match![1]);
      return item
        ? jsonResponse({ ...item, image_url: `/v1/items/${item.item_id}/image` })
        : errorResponse(404, "not_found", `no item '${match[1]}'`);
    }
    return errorResponse(404, "not_found", `no route ${method} ${path}`);
  }

  // -- ranking fakes --------------------------------------------------------

  private distance(query: string, itemId: string): number {
    return hash01(`${query}|${itemId}`);
  }

  private compatibility(a: string, b: string): number {
    const key = [a, b].sort().join("|");
    return 0.2 + 0.6 * hash01(key);
  }

  private candidatesFor(view: SessionView, slot: string): RankedCandidate[] {
    const filledIds = new Set(Object.values(view.filled));
    const filled = [...filledIds];
    const pool = this.items.filter(
      (item) => item.semantic_type === slot && !filledIds.has(item.item_id),
    );
    const ranked = pool.map((item) => {
      const distance = this.distance(view.query_text, item.item_id);
      let compatibility: number | null = null;
      let score = distance;
      if (filled.length > 0) {
        compatibility =
          filled.reduce((acc, other) => acc + this.compatibility(item.item_id, other), 0) /
          filled.length;
        score = distance / compatibility;
      }
      return {
        item_id: item.item_id,
        score,
        query_distance: distance,
        compatibility,
      };
    });
    ranked.sort((a, b) => a.score - b.score || a.item_id.localeCompare(b.item_id));
    return ranked;
  }

  private activeSlot(view: SessionView): string | null {
    const unfilled = view.slots.filter((slot) => !(slot in view.filled));
    if (unfilled.length === 0) return null;
    const means = unfilled.map((slot) => {
      const pool = this.items.filter((item) => item.semantic_type === slot);
      const mean =
        pool.reduce((acc, item) => acc + this.distance(view.query_text, item.item_id), 0) /
        Math.max(pool.length, 1);
      return { slot, mean };
    });
    means.sort((a, b) => a.mean - b.mean || a.slot.localeCompare(b.slot));
    return means[0].slot;
  }

  private withCandidates(view: SessionView): SessionView {
    const active = this.activeSlot(view);
    const complete = active === null;
    const candidates = complete ? [] : this.candidatesFor(view, active!).slice(0, 20);
    const outfit = complete
      ? view.slots.map((slot) => ({
          item_id: view.filled[slot],
          slot,
          title: this.items.find((it) => it.item_id === view.filled[slot])?.title ?? "",
        }))
      : undefined;
    return { ...view, complete, active_slot: active, candidates, outfit };
  }

  private search(params: URLSearchParams): Response {
    const text = (params.get("text") ?? "").trim();
    if (!text) return errorResponse(422, "invalid_query", "text must be non-empty");
    const type = params.get("type");
    if (type && !this.types.includes(type)) {
      return errorResponse(422, "unknown_type", `unknown semantic type '${type}'`,
                           { types: [type] });
    }
    const limit = Number(params.get("limit") ?? "10");
    const pool = type
      ? this.items.filter((item) => item.semantic_type === type)
      : this.items;
    const results = pool
      .map((item) => ({
        item_id: item.item_id,
        title: item.title,
        semantic_type: item.semantic_type,
        distance: this.distance(text, item.item_id),
        image_url: `/v1/items/${item.item_id}/image`,
      }))
      .sort((a, b) => a.distance - b.distance || a.item_id.localeCompare(b.item_id))
      .slice(0, limit);
    return jsonResponse({ results });
  }

  // -- handlers --------------------------------------------------------------

  private createSession(body: {
    query_text?: string;
    slots?: string[];
    config?: Partial<GenerationConfig>;
    starting_items?: string[];
  }): Response {
    const query = (body.query_text ?? "").trim();
    if (!query) return errorResponse(422, "invalid_query", "query_text must be non-empty");
    const slots = body.slots ?? [];
    const unknown = slots.filter((slot) => !this.types.includes(slot));
    if (unknown.length > 0) {
      return errorResponse(422, "unknown_type",
                           `unknown semantic type(s): ${unknown.join(", ")}`,
                           { types: unknown });
    }
    if (slots.length === 0) {
      return errorResponse(422, "validation_error", "slots must be non-empty");
    }
    const filled: Record<string, string> = {};
    for (const itemId of body.starting_items ?? []) {
      const item = this.items.find((it) => it.item_id === itemId);
      if (!item) return errorResponse(422, "unknown_item", `unknown item '${itemId}'`);
      if (!slots.includes(item.semantic_type)) {
        return errorResponse(422, "unknown_type",
                             `starting item '${itemId}' has type '${item.semantic_type}' outside the requested slots`,
                             { type: item.semantic_type });
      }
      filled[item.semantic_type] = itemId;
    }
    const now = new Date().toISOString();
    const view: SessionView = {
      session_id: `mock-${this.counter++}`,
      query_text: query,
      slots: [...slots],
      filled,
      locked: Object.keys(filled).sort(),
      config: {
        k: body.config?.k ?? 10,
        sampling: body.config?.sampling ?? "biased",
        compat_mode: body.config?.compat_mode ?? "cat",
        seed: body.config?.seed ?? 0,
      },
      trace: [],
      version: 0,
      created_at: now,
      updated_at: now,
      complete: false,
      active_slot: null,
      candidates: [],
    };
    this.sessions.set(view.session_id, { view });
    return jsonResponse(this.withCandidates(view), 201);
  }

  private step(sessionId: string, body: {
    action?: string;
    expected_version?: number;
    item_id?: string;
    slot?: string;
  }): Response {
    const session = this.sessions.get(sessionId);
    if (!session) return errorResponse(404, "not_found", `no session '${sessionId}'`);
    const view = session.view;
    if (body.expected_version !== view.version) {
      return errorResponse(409, "stale_version",
                           `expected_version ${body.expected_version} != current version ${view.version}`,
                           { version: view.version });
    }

    if (body.action === "auto" || body.action === "choose") {
      const active = this.activeSlot(view);
      if (active === null) {
        return errorResponse(409, "complete", "session already filled every slot");
      }
      const ranked = this.candidatesFor(view, active);
      let chosen: string;
      if (body.action === "auto") {
        chosen = ranked[0].item_id; // the mock always takes the top rank
      } else {
        if (!body.item_id || !ranked.some((c) => c.item_id === body.item_id)) {
          return errorResponse(422, "unknown_item",
                               `item '${body.item_id}' is not a candidate for slot '${active}'`);
        }
        chosen = body.item_id;
      }
      view.filled[active] = chosen;
      const step: TraceStep = {
        step: view.trace.length,
        slot: active,
        action: body.action,
        sampling: view.config.sampling,
        k: view.config.k,
        chosen,
        candidates: ranked.slice(0, 20),
      };
      view.trace.push(step);
    } else if (body.action === "undo") {
      const last = view.trace[view.trace.length - 1];
      if (!last) return errorResponse(422, "validation_error", "nothing to undo");
      if (view.locked.includes(last.slot)) {
        return errorResponse(422, "validation_error",
                             `slot '${last.slot}' is locked; unlock it first`);
      }
      view.trace.pop();
      delete view.filled[last.slot];
    } else if (body.action === "lock" || body.action === "unlock") {
      const slot = body.slot;
      if (!slot || !view.slots.includes(slot)) {
        return errorResponse(422, "validation_error", `unknown slot '${slot}'`);
      }
      if (body.action === "lock") {
        if (!(slot in view.filled)) {
          return errorResponse(422, "validation_error", `slot '${slot}' is not filled`);
        }
        if (!view.locked.includes(slot)) view.locked = [...view.locked, slot].sort();
      } else {
        view.locked = view.locked.filter((s) => s !== slot);
      }
    } else {
      return errorResponse(422, "validation_error", `unknown action '${body.action}'`);
    }

    view.version += 1;
    view.updated_at = new Date().toISOString();
    return jsonResponse(this.withCandidates(view));
  }
}
