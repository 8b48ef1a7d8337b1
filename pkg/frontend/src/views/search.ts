import type { SearchPayload } from "../api.js";
import { clear, h } from "../dom.js";

export interface SearchHandlers {
  onClusterClick?: (clusterId: number) => void;
}

// Rows are rendered in payload order; the API already returns hits ranked by
// index distance and the client never re-sorts.
export function renderSearchResults(
  root: HTMLElement,
  payload: SearchPayload,
  handlers: SearchHandlers = {},
): void {
  clear(root);
  const head = h("div", { class: "results-head" });
  head.append(
    h("span", { class: "results-query" }, `Results for "${payload.query}"`),
  );
  if (payload.predicted_cluster !== null) {
    head.append(
      h("span", { class: "results-predicted" },
        `query cluster: C${payload.predicted_cluster}`),
    );
  }
  root.append(head);

  if (payload.results.length === 0) {
    root.append(h("p", { class: "empty-state" }, "No matching papers."));
    return;
  }

  const list = h("ol", { class: "results" });
  for (const item of payload.results) {
    const row = h("li", { class: "result-row", "data-id": item.identifier });
    const title = h("div", { class: "result-head" },
      h("span", { class: "result-title" }, item.title),
      h("span", { class: "result-score" }, item.score.toFixed(4)),
    );
    const meta = h("div", { class: "result-meta" },
      [item.year ?? "n.d.", item.venue, item.subtype].filter(Boolean).join(" · "),
    );
    const chips = h("div", { class: "result-chips" });
    for (const clusterId of item.clusters) {
      const chip = h("button", {
        class: "chip",
        type: "button",
        "data-cluster": String(clusterId),
      }, `C${clusterId}`);
      chip.addEventListener("click", () => handlers.onClusterClick?.(clusterId));
      chips.append(chip);
    }
    if (item.clusters.length === 0) {
      chips.append(h("span", { class: "chip chip-none" }, "unclustered"));
    }
    row.append(title, meta, chips);
    list.append(row);
  }
  root.append(list);
}

export function renderSearchError(banner: HTMLElement, message: string): void {
  banner.textContent = message;
  banner.classList.remove("hidden");
  banner.classList.add("error");
}

export function clearBanner(banner: HTMLElement): void {
  banner.textContent = "";
  banner.classList.add("hidden");
  banner.classList.remove("error");
}
