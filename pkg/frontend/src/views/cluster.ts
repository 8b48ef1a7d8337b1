import type { ClusterDetailPayload } from "../api.js";
import { clear, h } from "../dom.js";

const MIN_FONT_PX = 12;
const FONT_SPAN_PX = 16;

// Word size is linear in the API weight; the weight itself (standardized
// centroid distance) is computed server-side and displayed untouched.
export function fontSizePx(weight: number): number {
  return MIN_FONT_PX + FONT_SPAN_PX * weight;
}

export function renderClusterView(root: HTMLElement, payload: ClusterDetailPayload): void {
  clear(root);
  const name = payload.label ? `${payload.label} (C${payload.id})` : `Cluster C${payload.id}`;
  root.append(h("h2", { class: "cluster-name" }, name));
  root.append(h("p", { class: "cluster-stats" },
    `${payload.keyword_count} keywords · ${payload.paper_count} papers`));

  const cloud = h("div", { class: "wordcloud" });
  const entries = Object.entries(payload.wordcloud)
    .sort((a, b) => b[1] - a[1] || a[0].localeCompare(b[0]));
  for (const [keyword, weight] of entries) {
    cloud.append(h("span", {
      class: "cloud-word",
      style: `font-size: ${fontSizePx(weight).toFixed(2)}px`,
      "data-weight": String(weight),
      title: `weight ${weight.toFixed(3)}`,
    }, keyword));
  }
  root.append(cloud);

  const members = h("ul", { class: "cluster-members" });
  for (const keyword of payload.members) {
    members.append(h("li", {}, keyword));
  }
  root.append(h("details", { class: "cluster-member-list" },
    h("summary", {}, "All keywords"), members));
}
