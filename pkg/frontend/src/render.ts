// Render one server state message into the DOM. The board is a pure
// function of the message: amounts are copied verbatim (no client
// arithmetic), legality comes only from the advertised legal move list.

import { isPathEdge, layoutPositions } from "./board.js";
import type { StateMessage } from "./protocol.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface RenderHooks {
  onNodeClick: (node: string) => void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  cls?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderState(
  root: HTMLElement,
  state: StateMessage,
  hooks: RenderHooks,
  flags: { locked: boolean; hintNode: string | null },
): void {
  root.textContent = "";
  const header = el("div", "status-bar");
  header.append(
    el("span", "turn", `t=${state.t}`),
    el("span", "totals", `defender ${state.X} vs attacker ${state.Y}`),
    el("span", "sensing", `sensing ${state.k}`),
  );
  if (!state.guarantee) {
    header.append(el("span", "banner sandbox", "no guarantee: defender below the bound"));
  }
  if (state.outcome) {
    const cls = state.outcome.result === "ATTACKER_WIN" ? "banner lost" : "banner held";
    header.append(el("span", cls, state.outcome.result));
  } else if (flags.locked) {
    header.append(el("span", "banner waiting", "waiting for defender..."));
  }
  root.append(header);

  const centers = el("div", "platoon-centers");
  for (const [label, cs] of Object.entries(state.platoon_centers).sort()) {
    centers.append(
      el("span", "platoon", `${label}: [${cs.map((c) => (c === null ? "-" : c)).join(", ")}]`),
    );
  }
  root.append(centers);

  const positions = layoutPositions(state.environment, state.d_star);
  let minY = 0;
  for (const p of positions.values()) minY = Math.min(minY, p.y);
  const offsetY = -minY + 70;
  const width = (state.environment.path.length + 2) * 110 + 80;
  const height = offsetY + 150;

  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "board");

  const legalDests = new Set<string>();
  for (const move of state.legal_moves) {
    if (move.kind !== "split" && move.flows.length === 1) {
      legalDests.add(move.flows[0]![1]);
    }
  }
  const visible = new Set(state.visibility);
  const advantageByNode = new Map<string, number | null>();
  for (const rows of Object.values(state.advantages)) {
    for (const row of rows) {
      const node = state.environment.path[row.i - 1];
      if (node !== undefined) {
        const prev = advantageByNode.get(node);
        // show the tightest advantage across groups
        if (
          prev === undefined ||
          (row.a !== null && (prev === null || row.a < prev))
        ) {
          advantageByNode.set(node, row.a);
        }
      }
    }
  }

  for (const [a, b] of state.environment.edges) {
    const pa = positions.get(a)!;
    const pb = positions.get(b)!;
    const line = document.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", String(pa.x));
    line.setAttribute("y1", String(pa.y + offsetY));
    line.setAttribute("x2", String(pb.x));
    line.setAttribute("y2", String(pb.y + offsetY));
    line.setAttribute(
      "class",
      isPathEdge(state.environment, a, b) ? "edge path-edge" : "edge",
    );
    svg.append(line);
  }

  const attackerNodes = new Map(state.groups.map((g) => [g[1], g[0]]));
  for (const node of state.environment.nodes) {
    const p = positions.get(node)!;
    const group = document.createElementNS(SVG_NS, "g");
    group.setAttribute("data-node", node);
    group.setAttribute("transform", `translate(${p.x}, ${p.y + offsetY})`);
    const classes = ["node"];
    if (state.environment.path.includes(node)) classes.push("path-node");
    if (visible.has(node)) classes.push("visible");
    if (legalDests.has(node)) classes.push("legal");
    if (flags.hintNode === node) classes.push("hint");
    if (state.outcome?.witness === node) classes.push("breached");
    group.setAttribute("class", classes.join(" "));

    const circle = document.createElementNS(SVG_NS, "circle");
    circle.setAttribute("r", "26");
    group.append(circle);

    const name = document.createElementNS(SVG_NS, "text");
    name.setAttribute("class", "node-name");
    name.setAttribute("y", "4");
    name.textContent = node;
    group.append(name);

    const def = state.defender_amounts[node];
    if (def !== undefined) {
      const badge = document.createElementNS(SVG_NS, "text");
      badge.setAttribute("class", "badge defender");
      badge.setAttribute("y", "-34");
      badge.textContent = def;
      group.append(badge);
    }
    const atk = state.attacker_amounts[node];
    if (atk !== undefined) {
      const badge = document.createElementNS(SVG_NS, "text");
      badge.setAttribute("class", "badge attacker");
      badge.setAttribute("y", "46");
      badge.textContent = atk;
      group.append(badge);
    }
    const label = attackerNodes.get(node);
    if (label !== undefined) {
      const tag = document.createElementNS(SVG_NS, "text");
      tag.setAttribute("class", "group-label");
      tag.setAttribute("y", "60");
      tag.textContent = label;
      group.append(tag);
    }
    const adv = advantageByNode.get(node);
    if (adv !== undefined) {
      const tag = document.createElementNS(SVG_NS, "text");
      tag.setAttribute("class", adv !== null && adv < 0 ? "advantage neg" : "advantage");
      tag.setAttribute("y", "-48");
      tag.textContent = adv === null ? "∞" : String(adv);
      group.append(tag);
    }
    group.addEventListener("click", () => hooks.onNodeClick(node));
    svg.append(group);
  }
  root.append(svg);

  const splits = state.legal_moves.filter((m) => m.kind === "split");
  if (splits.length > 0 && !state.outcome) {
    const panel = el("div", "split-panel");
    panel.append(el("span", "split-title", "splits:"));
    for (const move of splits) {
      const parts = move.flows.map((f) => `${f[2]}→${f[1]}`).join("  ");
      const button = el("button", "split-move", parts);
      button.setAttribute("data-move-id", String(move.id));
      panel.append(button);
    }
    root.append(panel);
  }
}

export function renderError(root: HTMLElement, reason: string): void {
  const banner = el("div", "banner error", `error: ${reason}`);
  root.prepend(banner);
}
