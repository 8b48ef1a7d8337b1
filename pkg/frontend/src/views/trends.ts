import type { TrendsPayload, TrendSeries } from "../api.js";
import { clear, h, svgEl } from "../dom.js";

const CHART_WIDTH = 560;
const CHART_HEIGHT = 160;
const AXIS = 24;

function seriesName(series: TrendSeries): string {
  if (series.query !== undefined) return `query: ${series.query}`;
  const label = series.label ? ` ${series.label}` : "";
  return `C${series.cluster}${label}`;
}

// One bar chart per series: bar height is linear in the API paper count.
export function renderTrendChart(root: HTMLElement, payload: TrendsPayload): void {
  clear(root);
  if (payload.series.length === 0) {
    root.append(h("p", { class: "empty-state" }, "No trend data."));
    return;
  }
  for (const series of payload.series) {
    const block = h("figure", { class: "trend-block" });
    block.append(h("figcaption", { class: "trend-title" }, seriesName(series)));
    if (series.points.length === 0) {
      block.append(h("p", { class: "empty-state" }, "No dated papers."));
      root.append(block);
      continue;
    }
    const svg = svgEl("svg", {
      class: "trend-chart",
      viewBox: `0 0 ${CHART_WIDTH} ${CHART_HEIGHT + AXIS}`,
      role: "img",
    });
    const maxCount = Math.max(...series.points.map(([, count]) => count));
    const slot = CHART_WIDTH / series.points.length;
    const barWidth = Math.min(48, slot * 0.7);
    series.points.forEach(([year, count], i) => {
      const height = maxCount > 0 ? (count / maxCount) * (CHART_HEIGHT - 8) : 0;
      const x = i * slot + (slot - barWidth) / 2;
      const bar = svgEl("rect", {
        class: "trend-bar",
        x: x.toFixed(1),
        y: (CHART_HEIGHT - height).toFixed(1),
        width: barWidth.toFixed(1),
        height: height.toFixed(1),
        "data-year": String(year),
        "data-count": String(count),
      });
      const tip = svgEl("title");
      tip.textContent = `${year}: ${count}`;
      bar.append(tip);
      svg.append(bar);

      const label = svgEl("text", {
        x: (i * slot + slot / 2).toFixed(1),
        y: String(CHART_HEIGHT + AXIS - 8),
        "text-anchor": "middle",
        class: "trend-year",
      });
      label.textContent = String(year);
      svg.append(label);
    });
    block.append(svg);
    root.append(block);
  }
}
