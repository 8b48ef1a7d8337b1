import type { ProjectionEdge, ProjectionPayload } from "../api.js";
import { clear, h, svgEl } from "../dom.js";

export const MAP_WIDTH = 640;
export const MAP_HEIGHT = 480;
const PAD = 40;
const MIN_RADIUS = 8;
const RADIUS_SPAN = 14;

export interface MapHandlers {
  onNodeClick?: (clusterId: number) => void;
  onEdgeClick?: (edge: ProjectionEdge) => void;
}

interface Placed {
  id: number;
  x: number;
  y: number;
}

function place(coords: Record<string, [number, number]>): Map<number, Placed> {
  const ids = Object.keys(coords).map(Number);
  const xs = ids.map((id) => coords[String(id)][0]);
  const ys = ids.map((id) => coords[String(id)][1]);
  const xMin = Math.min(...xs), xMax = Math.max(...xs);
  const yMin = Math.min(...ys), yMax = Math.max(...ys);
  const xSpan = xMax - xMin || 1;
  const ySpan = yMax - yMin || 1;
  const placed = new Map<number, Placed>();
  for (const id of ids) {
    const [x, y] = coords[String(id)];
    placed.set(id, {
      id,
      x: PAD + ((x - xMin) / xSpan) * (MAP_WIDTH - 2 * PAD),
      // flip y so larger component values point up
      y: MAP_HEIGHT - PAD - ((y - yMin) / ySpan) * (MAP_HEIGHT - 2 * PAD),
    });
  }
  return placed;
}

// Node radius grows linearly with keyword count, so radius ordering follows
// keyword-count ordering; edge metrics are carried verbatim from the API.
export function nodeRadius(count: number, maxCount: number): number {
  if (maxCount <= 0) return MIN_RADIUS;
  return MIN_RADIUS + RADIUS_SPAN * (count / maxCount);
}

export function renderClusterMap(
  root: HTMLElement,
  payload: ProjectionPayload,
  labels: Record<number, string> = {},
  handlers: MapHandlers = {},
): void {
  clear(root);
  const svg = svgEl("svg", {
    class: "cluster-map",
    viewBox: `0 0 ${MAP_WIDTH} ${MAP_HEIGHT}`,
    role: "img",
  });
  const placed = place(payload.coords);
  const maxCount = Math.max(0, ...Object.values(payload.node_sizes));

  const edgeLayer = svgEl("g", { class: "edges" });
  for (const edge of payload.edges) {
    const target = placed.get(edge.rhs[0]);
    const sources = edge.lhs.map((id) => placed.get(id)).filter(Boolean) as Placed[];
    if (!target || sources.length === 0) continue;
    const fromX = sources.reduce((acc, p) => acc + p.x, 0) / sources.length;
    const fromY = sources.reduce((acc, p) => acc + p.y, 0) / sources.length;
    const line = svgEl("line", {
      class: "edge",
      x1: fromX.toFixed(1),
      y1: fromY.toFixed(1),
      x2: target.x.toFixed(1),
      y2: target.y.toFixed(1),
      "data-lhs": edge.lhs.join(","),
      "data-rhs": edge.rhs.join(","),
      "data-support": String(edge.support),
      "data-confidence": String(edge.confidence),
      "data-lift": String(edge.lift),
    });
    const lhsName = edge.lhs.map((id) => `C${id}`).join(", ");
    const rhsName = edge.rhs.map((id) => `C${id}`).join(", ");
    const tip = svgEl("title");
    tip.textContent = `${lhsName} => ${rhsName} | support ${edge.support} | ` +
      `confidence ${edge.confidence} | lift ${edge.lift}`;
    line.append(tip);
    line.addEventListener("click", () => handlers.onEdgeClick?.(edge));
    edgeLayer.append(line);
  }
  svg.append(edgeLayer);

  const nodeLayer = svgEl("g", { class: "nodes" });
  for (const [id, pos] of [...placed.entries()].sort((a, b) => a[0] - b[0])) {
    const count = payload.node_sizes[String(id)] ?? 0;
    const group = svgEl("g", { class: "node", "data-cluster": String(id) });
    const circle = svgEl("circle", {
      cx: pos.x.toFixed(1),
      cy: pos.y.toFixed(1),
      r: nodeRadius(count, maxCount).toFixed(2),
      "data-count": String(count),
    });
    const tip = svgEl("title");
    tip.textContent = labels[id]
      ? `${labels[id]} (C${id}): ${count} keywords`
      : `C${id}: ${count} keywords`;
    circle.append(tip);
    const text = svgEl("text", {
      x: pos.x.toFixed(1),
      y: (pos.y - nodeRadius(count, maxCount) - 4).toFixed(1),
      "text-anchor": "middle",
    });
    text.textContent = `C${id}`;
    group.append(circle, text);
    group.addEventListener("click", () => handlers.onNodeClick?.(id));
    nodeLayer.append(group);
  }
  svg.append(nodeLayer);
  root.append(svg);
}

export function renderEdgeDetail(root: HTMLElement, edge: ProjectionEdge): void {
  clear(root);
  const lhs = edge.lhs.map((id) => `C${id}`).join(", ");
  const rhs = edge.rhs.map((id) => `C${id}`).join(", ");
  root.append(
    h("h3", {}, `${lhs} ⇒ ${rhs}`),
    h("dl", { class: "edge-metrics" },
      h("dt", {}, "support"), h("dd", {}, String(edge.support)),
      h("dt", {}, "confidence"), h("dd", {}, String(edge.confidence)),
      h("dt", {}, "lift"), h("dd", {}, String(edge.lift)),
    ),
  );
}
