// Deterministic board layout: the defended path sits on one horizontal
// line; off-path nodes stack above it in bands by their hop distance
// from the path. No randomness, so the same environment always renders
// the same picture.

import type { EnvironmentDoc } from "./protocol.js";

export interface NodePos {
  x: number;
  y: number;
}

export const X_STEP = 110;
export const Y_STEP = 95;

export function layoutPositions(
  env: EnvironmentDoc,
  dStar: Record<string, number>,
): Map<string, NodePos> {
  const pos = new Map<string, NodePos>();
  env.path.forEach((node, i) => pos.set(node, { x: (i + 1) * X_STEP, y: 0 }));

  const adjacency = new Map<string, string[]>();
  for (const node of env.nodes) adjacency.set(node, []);
  for (const [a, b] of env.edges) {
    adjacency.get(a)?.push(b);
    adjacency.get(b)?.push(a);
  }

  const bands = new Map<number, string[]>();
  for (const node of env.nodes) {
    const band = dStar[node] ?? 0;
    if (band > 0) {
      const row = bands.get(band) ?? [];
      row.push(node);
      bands.set(band, row);
    }
  }
  const maxBand = Math.max(0, ...bands.keys());
  for (let band = 1; band <= maxBand; band++) {
    const row = (bands.get(band) ?? []).slice().sort();
    const used = new Set<number>();
    for (const node of row) {
      // Anchor over already-placed neighbors; nudge right on collisions.
      const anchors = (adjacency.get(node) ?? [])
        .filter((n) => pos.has(n) && (dStar[n] ?? 0) < band)
        .map((n) => pos.get(n)!.x);
      let x =
        anchors.length > 0
          ? anchors.reduce((s, v) => s + v, 0) / anchors.length
          : (used.size + 1) * X_STEP;
      while (used.has(Math.round(x))) x += X_STEP / 2;
      used.add(Math.round(x));
      pos.set(node, { x, y: -band * Y_STEP });
    }
  }
  // Anything still unplaced (isolated decorations beyond known bands)
  // lines up deterministically at the top.
  let spill = 1;
  for (const node of env.nodes.slice().sort()) {
    if (!pos.has(node)) {
      pos.set(node, { x: spill * X_STEP, y: -(maxBand + 1) * Y_STEP });
      spill += 1;
    }
  }
  return pos;
}

export function isPathEdge(env: EnvironmentDoc, a: string, b: string): boolean {
  const ia = env.path.indexOf(a);
  const ib = env.path.indexOf(b);
  return ia >= 0 && ib >= 0 && Math.abs(ia - ib) === 1;
}
