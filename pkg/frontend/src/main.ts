/** App shell: three views (Query, Composer, Compare) over one API client.
 * The service origin defaults to the page origin; override with
 * `?api=http://host:port` for development against a separate server. */

import { ApiClient } from "./api";
import { clear, el } from "./dom";
import { ComposerStore } from "./state";
import { CompareView } from "./views/compare";
import { ComposerView } from "./views/composer";
import { renderQueryForm } from "./views/query";
import "./style.css";

export function mountApp(root: HTMLElement, api: ApiClient): void {
  const store = new ComposerStore(api);
  const composer = new ComposerView(store, api);
  const compare = new CompareView(api);

  const views: Record<string, HTMLElement> = {
    query: el("div"),
    composer: composer.root,
    compare: compare.root,
  };

  const content = el("main", { className: "content" });
  const show = (name: keyof typeof views) => {
    clear(content).append(views[name]);
  };

  const nav = el("nav", { className: "tabs" });
  for (const name of ["query", "composer", "compare"] as const) {
    const tab = el("button", { className: "tab", type: "button", dataset: { view: name } }, [name]);
    tab.addEventListener("click", () => show(name));
    nav.append(tab);
  }
  root.append(nav, content);

  void api.health().then((health) => {
    views.query.append(
      renderQueryForm({
        types: health.types,
        onSubmit: (req) => {
          void store.create(req).then((session) => {
            if (session) show("composer");
          });
        },
      }),
      (() => {
        const compareForm = el("div", { className: "compare-form" });
        const a = el("input", { placeholder: "query A" });
        const b = el("input", { placeholder: "query B" });
        const go = el("button", { type: "button" }, ["Compare queries"]);
        go.addEventListener("click", () => {
          void compare
            .start(a.value, b.value, { slots: health.types, config: { k: 10, sampling: "biased" } })
            .then(() => show("compare"));
        });
        compareForm.append(a, b, go);
        return compareForm;
      })(),
    );
    show("query");
  });
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("api") ?? "";
  mountApp(document.getElementById("app")!, new ApiClient(base));
}
