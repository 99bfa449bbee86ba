import type { ActivityView, CostSummary, InstanceSnapshot } from "./types.js";

const NODE_W = 150;
const NODE_H = 54;
const GAP_X = 60;
const GAP_Y = 24;

interface Position {
  x: number;
  y: number;
}

/** Column per topological level, rows sorted by id inside a column. */
export function computeLayout(snapshot: InstanceSnapshot): Map<string, Position> {
  const byLevel = new Map<number, string[]>();
  for (const [aid, view] of Object.entries(snapshot.activities)) {
    const level = view.level ?? 0;
    const bucket = byLevel.get(level) ?? [];
    bucket.push(aid);
    byLevel.set(level, bucket);
  }
  const positions = new Map<string, Position>();
  for (const [level, ids] of byLevel) {
    ids.sort();
    ids.forEach((aid, row) => {
      positions.set(aid, {
        x: level * (NODE_W + GAP_X),
        y: row * (NODE_H + GAP_Y),
      });
    });
  }
  return positions;
}

export function attemptBadge(view: ActivityView): string | null {
  if (view.placement === null || view.attempt === 0 && view.placement.instance_count <= 1) {
    return null;
  }
  return `attempt ${view.attempt + 1}, ${view.placement.instance_count} instances`;
}

/**
 * Renders the instance DAG: one positioned node per activity, colored by
 * its state class, guarded edges labeled, elastic activities badged with
 * their current attempt and instance count. Everything shown comes from
 * the snapshot; the renderer invents no state of its own.
 */
export function renderDag(root: HTMLElement, snapshot: InstanceSnapshot): void {
  root.textContent = "";
  const positions = computeLayout(snapshot);
  let width = 0;
  let height = 0;
  for (const pos of positions.values()) {
    width = Math.max(width, pos.x + NODE_W);
    height = Math.max(height, pos.y + NODE_H);
  }

  const canvas = document.createElement("div");
  canvas.className = "dag-canvas";
  canvas.style.width = `${width}px`;
  canvas.style.height = `${height}px`;

  const svgNs = "http://www.w3.org/2000/svg";
  const svg = document.createElementNS(svgNs, "svg");
  svg.setAttribute("class", "dag-edges");
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  for (const edge of snapshot.edges) {
    const from = positions.get(edge.from);
    const to = positions.get(edge.to);
    if (!from || !to) continue;
    const line = document.createElementNS(svgNs, "line");
    line.setAttribute("x1", String(from.x + NODE_W));
    line.setAttribute("y1", String(from.y + NODE_H / 2));
    line.setAttribute("x2", String(to.x));
    line.setAttribute("y2", String(to.y + NODE_H / 2));
    line.setAttribute("class", "dag-edge");
    svg.appendChild(line);
    if (edge.guard !== null) {
      const label = document.createElementNS(svgNs, "text");
      label.setAttribute("x", String((from.x + NODE_W + to.x) / 2));
      label.setAttribute("y", String((from.y + to.y + NODE_H) / 2 - 4));
      label.setAttribute("class", "dag-guard-label");
      label.textContent = edge.guard;
      svg.appendChild(label);
    }
  }
  canvas.appendChild(svg);

  for (const [aid, view] of Object.entries(snapshot.activities)) {
    const pos = positions.get(aid);
    if (!pos) continue;
    const node = document.createElement("div");
    node.className = `dag-node state-${view.state}`;
    node.dataset.activity = aid;
    node.dataset.state = view.state;
    node.style.left = `${pos.x}px`;
    node.style.top = `${pos.y}px`;

    const name = document.createElement("div");
    name.className = "dag-node-name";
    name.textContent = aid;
    node.appendChild(name);

    const state = document.createElement("div");
    state.className = "dag-node-state";
    state.textContent = view.state + (view.decision_label ? ` (${view.decision_label})` : "");
    node.appendChild(state);

    const badge = attemptBadge(view);
    if (badge !== null) {
      const badgeEl = document.createElement("div");
      badgeEl.className = "dag-node-badge";
      badgeEl.textContent = badge;
      node.appendChild(badgeEl);
    }
    canvas.appendChild(node);
  }
  root.appendChild(canvas);
}

/** Per-cloud accrued cost plus the instance total and the sim clock. */
export function renderCosts(root: HTMLElement, costs: CostSummary, simTimeS: number): void {
  root.textContent = "";
  const clock = document.createElement("div");
  clock.className = "cost-clock";
  clock.textContent = `sim time ${simTimeS}s`;
  root.appendChild(clock);
  const list = document.createElement("ul");
  list.className = "cost-list";
  for (const [cloud, amount] of Object.entries(costs.per_cloud).sort()) {
    const row = document.createElement("li");
    row.dataset.cloud = cloud;
    row.textContent = `${cloud}: ${amount}`;
    list.appendChild(row);
  }
  root.appendChild(list);
  const total = document.createElement("div");
  total.className = "cost-total";
  total.dataset.total = costs.total;
  total.textContent = `total: ${costs.total}`;
  root.appendChild(total);
}
