/** Composer screen: slot board, ranked candidate grid, step controls.
 *
 * Every number shown comes verbatim from the last server response; the
 * only client state is the highlighted candidate and the pending flag.
 */

import type { ApiClient } from "../api";
import { clear, el, num } from "../dom";
import { CANDIDATE_PAGE_SIZE, ComposerStore } from "../state";
import type { ComposerState } from "../state";
import type { SessionView } from "../types";

/** Serialize the completed outfit exactly as the server reported it. */
export function exportOutfitJson(session: SessionView): string {
  return JSON.stringify(
    {
      session_id: session.session_id,
      query: session.query_text,
      slots: session.slots,
      items: session.slots.map((slot) => ({ slot, item_id: session.filled[slot] })),
      config: session.config,
      trace: session.trace.map((step) => ({
        step: step.step,
        slot: step.slot,
        action: step.action,
        chosen: step.chosen,
      })),
    },
    null,
    2,
  );
}

export class ComposerView {
  readonly root: HTMLElement;

  constructor(
    private store: ComposerStore,
    private api: ApiClient,
    title = "Composer",
  ) {
    this.root = el("section", { className: "composer" }, [
      el("h2", {}, [title]),
    ]);
    this.store.subscribe((state) => this.render(state));
    this.render(this.store.current);
  }


  private render(state: ComposerState) {
    clear(this.root);

    if (state.error) {
      const banner = el("div", {
        className: state.conflict ? "banner banner-conflict" : "banner banner-error",
      }, [
        state.error,
        el("button", { className: "banner-dismiss", type: "button" }, ["dismiss"]),
      ]);
      banner.querySelector("button")!.addEventListener("click", () => this.store.dismissError());
      this.root.append(banner);
    }

    const session = state.session;
    if (!session) {
      this.root.append(el("p", { className: "empty-note" }, ["No session yet."]));
      return;
    }

    this.root.append(
      el("p", { className: "query-line" }, [
        el("strong", {}, ["query: "]),
        session.query_text,
        ` (k=${session.config.k}, ${session.config.sampling}, v${session.version})`,
      ]),
    );

    // slot board
    const board = el("div", { className: "slot-board" });
    for (const slot of session.slots) {
      const itemId = session.filled[slot];
      const locked = session.locked.includes(slot);
      const cell = el("div", {
        className: `slot-cell${itemId ? " slot-filled" : ""}${
          slot === session.active_slot ? " slot-active" : ""
        }`,
        dataset: { slot },
      });
      cell.append(el("div", { className: "slot-name" }, [slot]));
      if (itemId) {
        cell.append(
          el("img", {
            className: "slot-image",
            src: this.api.itemImageUrl(itemId),
            alt: itemId,
          }),
          el("div", { className: "slot-item-id" }, [itemId]),
        );
        const lockButton = el(
          "button",
          { className: "lock-button", type: "button" },
          [locked ? "unlock" : "lock"],
        );
        lockButton.addEventListener("click", () =>
          locked ? this.store.unlock(slot) : this.store.lock(slot),
        );
        cell.append(lockButton);
      } else {
        cell.append(el("div", { className: "slot-empty" }, ["(empty)"]));
      }
      board.append(cell);
    }
    this.root.append(board);

    // controls
    const controls = el("div", { className: "controls" });
    const button = (label: string, className: string, handler: () => void, disabled = false) => {
      const node = el("button", { className, type: "button", disabled }, [label]);
      node.addEventListener("click", handler);
      controls.append(node);
    };
    const busy = state.pending;
    button("Auto-step", "auto-button", () => void this.store.auto(),
           busy || session.complete);
    button("Regenerate remaining", "complete-button", () => void this.store.autoComplete(),
           busy || session.complete);
    button("Pick selected", "pick-button", () => {
      if (state.selected) void this.store.pick(state.selected);
    }, busy || !state.selected || session.complete);
    button("Undo", "undo-button", () => void this.store.undo(),
           busy || session.trace.length === 0);
    this.root.append(controls);

    if (session.complete) {
      const outfitIds = session.slots.map((slot) => session.filled[slot]);
      const exportHref =
        "data:application/json;charset=utf-8," +
        encodeURIComponent(exportOutfitJson(session));
      this.root.append(
        el("div", { className: "complete-note", dataset: { outfit: outfitIds.join(",") } }, [
          "Outfit complete: ",
          outfitIds.join(", "),
        ]),
        el("div", { className: "export-row" }, [
          el("a", {
            className: "export-json",
            href: exportHref,
            download: `outfit-${session.session_id}.json`,
          }, ["Export JSON"]),
          el("a", {
            className: "export-board",
            href: this.api.sessionBoardUrl(session.session_id),
            target: "_blank",
          }, ["Board image"]),
        ]),
      );
      return;
    }

    // ranked candidate grid for the active slot
    this.root.append(
      el("h3", {}, [`candidates for ${session.active_slot ?? "?"}`]),
    );
    const grid = el("div", { className: "candidate-grid" });
    for (const candidate of session.candidates.slice(0, CANDIDATE_PAGE_SIZE)) {
      const card = el("div", {
        className: `candidate${state.selected === candidate.item_id ? " candidate-selected" : ""}`,
        dataset: { itemId: candidate.item_id },
      }, [
        el("img", {
          className: "candidate-image",
          src: this.api.itemImageUrl(candidate.item_id),
          alt: candidate.item_id,
        }),
        el("div", { className: "candidate-id" }, [candidate.item_id]),
        el("div", { className: "candidate-numbers" }, [
          `r=${num(candidate.score)} d=${num(candidate.query_distance)} c=${num(candidate.compatibility)}`,
        ]),
      ]);
      card.addEventListener("click", () => this.store.select(candidate.item_id));
      grid.append(card);
    }
    this.root.append(grid);
  }
}
