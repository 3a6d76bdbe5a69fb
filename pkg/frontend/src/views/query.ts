/** Query screen: free text plus modifier chips, slot multiselect,
 * top-k slider, and the sampling-mode toggle. */

import { el } from "../dom";
import type { CreateSessionRequest, GenerationConfig } from "../types";

const MODIFIERS: Record<string, string[]> = {
  color: ["black", "white", "red", "blue", "pastel"],
  season: ["summer", "winter", "spring", "autumn"],
  occasion: ["casual", "formal", "beach", "city", "festival"],
};

export interface QueryFormOptions {
  types: string[];
  onSubmit: (req: CreateSessionRequest) => void;
  defaults?: Partial<GenerationConfig>;
}

export function renderQueryForm(options: QueryFormOptions): HTMLElement {
  const input = el("input", {
    className: "query-input",
    placeholder: "describe the outfit, e.g. 'bohemian summer look'",
  });
  const chips: string[] = [];
  const chipBar = el("div", { className: "chip-bar" });
  for (const [group, words] of Object.entries(MODIFIERS)) {
    const label = el("span", { className: "chip-group" }, [`${group}:`]);
    chipBar.append(label);
    for (const word of words) {
      const chip = el("button", { className: "chip", type: "button" }, [word]);
      chip.addEventListener("click", () => {
        const index = chips.indexOf(word);
        if (index >= 0) {
          chips.splice(index, 1);
          chip.classList.remove("chip-on");
        } else {
          chips.push(word);
          chip.classList.add("chip-on");
        }
      });
      chipBar.append(chip);
    }
  }

  const slotBoxes = options.types.map((type) => {
    const box = el("input", { type: "checkbox", checked: true, id: `slot-${type}` });
    return { type, box };
  });
  const slotBar = el(
    "div",
    { className: "slot-select" },
    slotBoxes.flatMap(({ type, box }) => [
      box,
      el("label", { htmlFor: `slot-${type}` }, [type]),
    ]),
  );

  const kSlider = el("input", {
    type: "range",
    min: "1",
    max: "20",
    value: String(options.defaults?.k ?? 10),
    className: "k-slider",
  });
  const kLabel = el("span", { className: "k-label" }, [`k = ${kSlider.value}`]);
  kSlider.addEventListener("input", () => {
    kLabel.textContent = `k = ${kSlider.value}`;
  });

  const sampling = el("select", { className: "sampling-select" });
  for (const mode of ["biased", "uniform", "greedy"]) {
    sampling.append(el("option", { value: mode, textContent: mode }));
  }
  sampling.value = options.defaults?.sampling ?? "biased";

  const submit = el("button", { className: "start-button", type: "button" }, [
    "Compose outfit",
  ]);
  submit.addEventListener("click", () => {
    const slots = slotBoxes.filter(({ box }) => box.checked).map(({ type }) => type);
    const text = [input.value.trim(), ...chips].filter(Boolean).join(" ");
    options.onSubmit({
      query_text: text,
      slots,
      config: {
        k: Number(kSlider.value),
        sampling: sampling.value as GenerationConfig["sampling"],
      },
    });
  });

  return el("div", { className: "query-form" }, [
    input,
    chipBar,
    slotBar,
    el("div", { className: "config-row" }, [kSlider, kLabel, sampling]),
    submit,
  ]);
}
