/**
 * Wire types and framing for the qeraser line protocol.
 *
 * Every message is one JSON object per newline. The server opens with a
 * hello; afterwards the client sends {cmd: ...} objects and receives typed
 * {type: ...} replies plus the subscribed event broadcast.
 */

export const PROTOCOL = "qeraser/1";
export const PROTOCOL_VERSION = 1;

export interface RunParams {
  seed: number;
  n_pairs: number;
  rate: number;
  lookahead: number;
  bins: number;
  bs_in: boolean;
  interarrival_mean_ns: number;
  apparatus: Record<string, number | boolean>;
}

export interface HelloMsg {
  type: "hello";
  protocol: string;
  version: number;
  run: RunParams;
  bin_edges: number[];
}

export interface EventMsg {
  type: "event";
  pair_id: number;
  t_signal_ns: number;
  u: number;
  bs_in: boolean;
  detector: "D1" | "D2";
  t_idler_ns: number;
}

export interface AckMsg {
  type: "ack";
  cmd: string;
  value?: boolean;
  applied_from_event?: number;
  changed?: boolean;
  seed?: number;
}

export interface SnapshotMsg {
  type: "snapshot";
  events: number;
  generated: number;
  bs_in: boolean;
  running: boolean;
  finished: boolean;
  counts: { ungated: number[]; d1: number[]; d2: number[] };
  choice_log: { applied_from_event: number; value: boolean; changed: boolean }[];
}

export interface OverlayMsg {
  type: "overlay";
  centers: number[];
  marginal: number[];
  fit_basis: { env: number[]; env_sin: number[]; env_cos: number[] };
  conditionals: Record<"bs_in" | "bs_out", { d1: number[]; d2: number[] }>;
  detector_probability: Record<"bs_in" | "bs_out", { d1: number; d2: number }>;
}

export interface StatusMsg {
  type: "status";
  running: boolean;
  finished: boolean;
  events: number;
  bs_in: boolean;
  seed: number;
}

export interface ErrorMsg {
  type: "error";
  message: string;
}

export type ServerMsg =
  | HelloMsg
  | EventMsg
  | AckMsg
  | SnapshotMsg
  | OverlayMsg
  | StatusMsg
  | ErrorMsg;

export type Command =
  | { cmd: "subscribe" }
  | { cmd: "set_bs"; value: boolean }
  | { cmd: "snapshot" }
  | { cmd: "overlay" }
  | { cmd: "start" }
  | { cmd: "pause" }
  | { cmd: "reset"; seed?: number }
  | { cmd: "status" };

export function encodeCommand(cmd: Command): string {
  return JSON.stringify(cmd) + "\n";
}

export function parseServerLine(line: string): ServerMsg {
  let obj: unknown;
  try {
    obj = JSON.parse(line);
  } catch {
    throw new Error(`unparseable server line: ${line.slice(0, 120)}`);
  }
  if (typeof obj !== "object" || obj === null || typeof (obj as any).type !== "string") {
    throw new Error("server message has no type field");
  }
  return obj as ServerMsg;
}

/** Incremental newline splitter for stream transports. */
export class LineDecoder {
  private buffer = "";

  push(chunk: string): string[] {
    this.buffer += chunk;
    const parts = this.buffer.split("\n");
    this.buffer = parts.pop() ?? "";
    return parts.filter((p) => p.length > 0);
  }
}
