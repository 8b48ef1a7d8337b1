import { describe, expect, it } from "vitest";

import type { ClusterDetailPayload } from "../src/api.js";
import { fontSizePx, renderClusterView } from "../src/views/cluster.js";
import clusterFixture from "./fixtures/cluster_detail.json";

const payload = clusterFixture as ClusterDetailPayload;

function render(): HTMLElement {
  const root = document.createElement("div");
  document.body.append(root);
  renderClusterView(root, payload);
  return root;
}

describe("cluster view word cloud", () => {
  it("renders every keyword in the cloud", () => {
    const root = render();
    const words = [...root.querySelectorAll(".cloud-word")].map((el) => el.textContent);
    expect(new Set(words)).toEqual(new Set(Object.keys(payload.wordcloud)));
  });

  it("font sizes are monotone in the API weights", () => {
    const root = render();
    const entries = [...root.querySelectorAll<HTMLElement>(".cloud-word")].map((el) => ({
      weight: Number(el.getAttribute("data-weight")),
      size: Number.parseFloat(el.style.fontSize),
    }));
    for (const a of entries) {
      for (const b of entries) {
        if (a.weight > b.weight) expect(a.size).toBeGreaterThanOrEqual(b.size);
        if (a.weight === b.weight) expect(a.size).toBeCloseTo(b.size, 6);
      }
    }
  });

  it("size mapping is linear in the weight", () => {
    expect(fontSizePx(0)).toBeCloseTo(12);
    expect(fontSizePx(1)).toBeCloseTo(28);
    expect(fontSizePx(0.5)).toBeCloseTo((fontSizePx(0) + fontSizePx(1)) / 2, 9);
  });

  it("shows keyword and paper counts straight from the payload", () => {
    const root = render();
    const stats = root.querySelector(".cluster-stats")?.textContent ?? "";
    expect(stats).toContain(`${payload.keyword_count} keywords`);
    expect(stats).toContain(`${payload.paper_count} papers`);
  });

  it("lists every member keyword", () => {
    const root = render();
    const members = [...root.querySelectorAll(".cluster-members li")]
      .map((el) => el.textContent);
    expect(members).toEqual(payload.members);
  });

  it("matches the golden snapshot", () => {
    const root = render();
    expect(root.innerHTML).toMatchSnapshot();
  });
});
