// Client session state machine. One in-flight request at a time: input
// locks on send and unlocks when the server answers. The client never
// decides legality itself; a click is either one of the advertised
// moves or it is ignored with a hint flash.

import type {
  ClientMessage,
  LegalMove,
  ServerMessage,
  StateMessage,
  TraceMessage,
} from "./protocol.js";
import { isState } from "./protocol.js";

export interface Transport {
  send(text: string): void;
  onMessage(handler: (text: string) => void): void;
}

export class WebSocketTransport implements Transport {
  private handler: ((text: string) => void) | null = null;

  constructor(private readonly socket: WebSocket) {
    socket.addEventListener("message", (event) => {
      if (this.handler) this.handler(String(event.data));
    });
  }

  send(text: string): void {
    this.socket.send(text);
  }

  onMessage(handler: (text: string) => void): void {
    this.handler = handler;
  }
}

export type SessionListener = (session: BoardSession) => void;

export class BoardSession {
  state: StateMessage | null = null;
  locked = false;
  frozen = false; // malformed server data: stop accepting anything
  errorBanner: string | null = null;
  hintNode: string | null = null;
  lastTrace: TraceMessage | null = null;
  readonly viewLog: StateMessage[] = [];

  constructor(
    private readonly transport: Transport,
    private readonly listener: SessionListener,
  ) {
    transport.onMessage((text) => this.receive(text));
  }

  start(config: unknown): void {
    this.sendMessage({ type: "new", config });
  }

  requestExport(): void {
    if (this.state) {
      this.transport.send(
        JSON.stringify({ type: "export", session: this.state.session }),
      );
    }
  }

  /** A click on a board node: submit the advertised single-destination
   * move to that node, if there is one; otherwise flash a hint. */
  clickNode(node: string): void {
    if (this.frozen || this.locked || !this.state || this.state.outcome) {
      return;
    }
    const move = this.state.legal_moves.find(
      (m) => m.kind !== "split" && m.flows.length === 1 && m.flows[0]![1] === node,
    );
    if (!move) {
      this.hintNode = node;
      this.listener(this);
      return;
    }
    this.submit(move);
  }

  /** Submit an advertised move by id (split buttons use this). */
  pickMove(moveId: number): void {
    if (this.frozen || this.locked || !this.state || this.state.outcome) {
      return;
    }
    const move = this.state.legal_moves.find((m) => m.id === moveId);
    if (move) this.submit(move);
  }

  private submit(move: LegalMove): void {
    if (!this.state) return;
    this.hintNode = null;
    this.locked = true;
    this.sendMessage({
      type: "move",
      session: this.state.session,
      flows: move.flows,
    });
  }

  private sendMessage(message: ClientMessage): void {
    this.transport.send(JSON.stringify(message));
    this.listener(this);
  }

  private receive(text: string): void {
    if (this.frozen) return;
    let message: ServerMessage;
    try {
      message = JSON.parse(text) as ServerMessage;
      if (!message || typeof message !== "object" || !("type" in message)) {
        throw new Error("not a protocol message");
      }
    } catch {
      this.frozen = true;
      this.errorBanner = "malformed server message";
      this.listener(this);
      return;
    }
    if (isState(message)) {
      this.state = message;
      this.viewLog.push(message);
      this.locked = false;
      this.errorBanner = null;
      this.hintNode = null;
    } else if (message.type === "error") {
      // Rejection: state unchanged, input reopens.
      this.errorBanner = message.reason;
      this.locked = false;
    } else {
      this.lastTrace = message;
    }
    this.listener(this);
  }
}
