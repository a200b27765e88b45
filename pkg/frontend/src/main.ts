// Browser wiring: connect to the play server, render on every session
// event, and hook board clicks / split buttons / export.

import { renderError, renderState } from "./render.js";
import { BoardSession, WebSocketTransport } from "./session.js";

const DEMO_CONFIG = {
  environment: {
    nodes: ["p1", "p2", "p3", "p4", "p5", "u12", "u23", "u34", "u45", "w"],
    edges: [
      ["p1", "p2"], ["p2", "p3"], ["p3", "p4"], ["p4", "p5"],
      ["u12", "p1"], ["u12", "p2"], ["u23", "p2"], ["u23", "p3"],
      ["u34", "p3"], ["u34", "p4"], ["u45", "p4"], ["u45", "p5"],
      ["u12", "u23"], ["u23", "u34"], ["u34", "u45"], ["w", "u45"],
    ],
    path: ["p1", "p2", "p3", "p4", "p5"],
  },
  k: 1,
  X: "3/1",
  Y: "1/1",
  start: "w",
  fractional: true,
};

function configFromPage(): unknown {
  const holder = document.getElementById("game-config");
  if (holder?.textContent) {
    try {
      return JSON.parse(holder.textContent);
    } catch {
      // fall through to the demo board
    }
  }
  return DEMO_CONFIG;
}

function bootstrap(): void {
  const root = document.getElementById("app");
  if (!root) return;
  const socket = new WebSocket(`ws://${window.location.host}/ws`);
  const transport = new WebSocketTransport(socket);
  const session = new BoardSession(transport, (s) => {
    if (s.state) {
      renderState(root, s.state, { onNodeClick: (node) => s.clickNode(node) }, {
        locked: s.locked,
        hintNode: s.hintNode,
      });
      for (const button of root.querySelectorAll<HTMLButtonElement>(".split-move")) {
        button.addEventListener("click", () =>
          s.pickMove(Number(button.dataset.moveId)),
        );
      }
      const exporter = document.createElement("button");
      exporter.className = "export";
      exporter.textContent = "download trace";
      exporter.addEventListener("click", () => s.requestExport());
      root.append(exporter);
    }
    if (s.errorBanner) renderError(root, s.errorBanner);
    if (s.lastTrace) {
      const blob = new Blob(
        s.lastTrace.records.map((r) => JSON.stringify(r) + "\n"),
        { type: "application/jsonl" },
      );
      const link = document.createElement("a");
      link.href = URL.createObjectURL(blob);
      link.download = `ddab-session-${s.lastTrace.session}.jsonl`;
      link.click();
      s.lastTrace = null;
    }
  });
  socket.addEventListener("open", () => session.start(configFromPage()));
}

bootstrap();
