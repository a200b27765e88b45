// Wire types for the play-server message protocol. Amounts are exact
// rationals serialized as "num/den" strings and must never be parsed
// into floats client-side; the board displays them verbatim.

export type Amount = string;
export type WireFlow = [string, string, Amount];

export interface EnvironmentDoc {
  nodes: string[];
  edges: [string, string][];
  path: string[];
}

export interface LegalMove {
  id: number;
  group: string;
  kind: "stay" | "step" | "split";
  flows: WireFlow[];
}

export interface AdvantageRow {
  i: number;
  d_A: number | null; // null: adversary unobserved
  d_D: number;
  a: number | null;
  in_frontier: boolean;
}

export interface Outcome {
  result: string;
  win_step: number | null;
  witness: string | null;
}

export interface StateMessage {
  type: "state";
  session: string;
  t: number;
  environment: EnvironmentDoc;
  d_star: Record<string, number>;
  k: number;
  X: Amount;
  Y: Amount;
  guarantee: boolean;
  defender_amounts: Record<string, Amount>;
  attacker_amounts: Record<string, Amount>;
  groups: [string, string, Amount][];
  platoon_centers: Record<string, (number | null)[]>;
  advantages: Record<string, AdvantageRow[]>;
  visibility: string[];
  legal_moves: LegalMove[];
  last_attacker_flows: WireFlow[];
  last_defender_flows: WireFlow[];
  outcome: Outcome | null;
}

export interface ErrorMessage {
  type: "error";
  reason: string;
  session?: string;
}

export interface TraceMessage {
  type: "trace";
  session: string;
  records: Record<string, unknown>[];
}

export type ServerMessage = StateMessage | ErrorMessage | TraceMessage;

export interface NewMessage {
  type: "new";
  config: unknown;
}

export interface MoveMessage {
  type: "move";
  session: string;
  flows: WireFlow[];
}

export interface ExportMessage {
  type: "export";
  session: string;
}

export type ClientMessage = NewMessage | MoveMessage | ExportMessage;

export function isState(msg: ServerMessage): msg is StateMessage {
  return msg.type === "state";
}
