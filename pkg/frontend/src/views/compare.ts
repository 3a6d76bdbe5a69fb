/** Compare screen: two sessions from two queries, side by side.
 * Each pane owns an independent store so nothing leaks across. */

import type { ApiClient } from "../api";
import { el } from "../dom";
import { ComposerStore } from "../state";
import { ComposerView } from "./composer";
import type { CreateSessionRequest } from "../types";

export class CompareView {
  readonly root: HTMLElement;
  readonly left: ComposerStore;
  readonly right: ComposerStore;

  constructor(api: ApiClient) {
    this.left = new ComposerStore(api);
    this.right = new ComposerStore(api);
    const leftView = new ComposerView(this.left, api, "Query A");
    const rightView = new ComposerView(this.right, api, "Query B");
    leftView.root.classList.add("compare-pane", "compare-left");
    rightView.root.classList.add("compare-pane", "compare-right");
    this.root = el("div", { className: "compare" }, [leftView.root, rightView.root]);
  }

  /** Start both sessions; shared body, different query text. */
  async start(queryA: string, queryB: string, base: Omit<CreateSessionRequest, "query_text">) {
    await Promise.all([
      this.left.create({ ...base, query_text: queryA }),
      this.right.create({ ...base, query_text: queryB }),
    ]);
  }
}
