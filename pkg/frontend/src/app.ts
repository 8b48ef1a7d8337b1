import { ApiClient } from "./api.js";
import { clear, h } from "./dom.js";
import { renderClusterView } from "./views/cluster.js";
import { renderClusterMap, renderEdgeDetail } from "./views/map.js";
import { clearBanner, renderSearchError, renderSearchResults } from "./views/search.js";
import { renderTrendChart } from "./views/trends.js";

const DEBOUNCE_MS = 250;

type ViewName = "search" | "cluster" | "map" | "clusters";

function mustGet(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el;
}

export function startApp(api: ApiClient = new ApiClient()): void {
  const banner = mustGet("banner");
  const sections: Record<ViewName, HTMLElement> = {
    search: mustGet("search-view"),
    cluster: mustGet("cluster-view"),
    map: mustGet("map-view"),
    clusters: mustGet("clusters-view"),
  };
  const form = mustGet("search-form") as HTMLFormElement;
  const input = mustGet("search-input") as HTMLInputElement;
  const results = mustGet("search-results");
  const trends = mustGet("search-trends");

  let inflight: AbortController | null = null;
  let requestToken = 0;
  let debounceTimer: ReturnType<typeof setTimeout> | undefined;

  function show(view: ViewName): void {
    for (const [name, section] of Object.entries(sections)) {
      section.classList.toggle("hidden", name !== view);
    }
    for (const button of document.querySelectorAll<HTMLButtonElement>("nav [data-view]")) {
      button.classList.toggle("active", button.dataset.view === view);
    }
  }

  async function openCluster(clusterId: number): Promise<void> {
    try {
      const detail = await api.clusterDetail(clusterId);
      renderClusterView(sections.cluster, detail);
      clearBanner(banner);
      show("cluster");
    } catch (error) {
      renderSearchError(banner, `Could not load cluster C${clusterId}: ${String(error)}`);
    }
  }

  async function runSearch(query: string): Promise<void> {
    const trimmed = query.trim();
    if (!trimmed) {
      renderSearchError(banner, "Enter a query to search.");
      return;
    }
    inflight?.abort();
    const controller = new AbortController();
    inflight = controller;
    const token = ++requestToken;
    try {
      const payload = await api.search(trimmed, 10, controller.signal);
      if (token !== requestToken) return; // a newer request already landed
      clearBanner(banner);
      renderSearchResults(results, payload, { onClusterClick: openCluster });
      show("search");
      const trendPayload = await api.trendsForQuery(trimmed, 10, controller.signal);
      if (token !== requestToken) return;
      renderTrendChart(trends, trendPayload);
    } catch (error) {
      if ((error as DOMException).name === "AbortError") return;
      if (token !== requestToken) return;
      // keep whatever results are on screen; just surface the failure
      renderSearchError(banner, `Search failed: ${String(error)}`);
    }
  }

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    clearTimeout(debounceTimer);
    void runSearch(input.value);
  });
  input.addEventListener("input", () => {
    clearTimeout(debounceTimer);
    if (!input.value.trim()) return; // do not fire requests while emptying the box
    debounceTimer = setTimeout(() => void runSearch(input.value), DEBOUNCE_MS);
  });

  async function openMap(): Promise<void> {
    try {
      const [projection, clusterList] = await Promise.all([
        api.projection(),
        api.clusters(),
      ]);
      const labels: Record<number, string> = {};
      for (const entry of clusterList.clusters) labels[entry.id] = entry.label;
      const mapEl = mustGet("map-canvas");
      const detailEl = mustGet("map-detail");
      renderClusterMap(mapEl, projection, labels, {
        onNodeClick: openCluster,
        onEdgeClick: (edge) => renderEdgeDetail(detailEl, edge),
      });
      clearBanner(banner);
      show("map");
    } catch (error) {
      renderSearchError(banner, `Cluster map unavailable: ${String(error)}`);
    }
  }

  async function openClusterList(): Promise<void> {
    try {
      const payload = await api.clusters();
      const section = sections.clusters;
      clear(section);
      const table = h("table", { class: "cluster-table" });
      table.append(h("tr", {},
        h("th", {}, "cluster"), h("th", {}, "label"),
        h("th", {}, "keywords"), h("th", {}, "papers")));
      for (const entry of payload.clusters) {
        const row = h("tr", { class: "cluster-row", "data-cluster": String(entry.id) },
          h("td", {}, `C${entry.id}`),
          h("td", {}, entry.label || "—"),
          h("td", {}, String(entry.keyword_count)),
          h("td", {}, String(entry.paper_count)));
        row.addEventListener("click", () => void openCluster(entry.id));
        table.append(row);
      }
      section.append(table);
      clearBanner(banner);
      show("clusters");
    } catch (error) {
      renderSearchError(banner, `Cluster list unavailable: ${String(error)}`);
    }
  }

  for (const button of document.querySelectorAll<HTMLButtonElement>("nav [data-view]")) {
    button.addEventListener("click", () => {
      const view = button.dataset.view as ViewName;
      if (view === "map") void openMap();
      else if (view === "clusters") void openClusterList();
      else show(view);
    });
  }

  show("search");
}

if (typeof window !== "undefined" && document.getElementById("search-form")) {
  startApp();
}
