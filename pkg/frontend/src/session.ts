/**
 * Session state machine: one live view of the experiment per connection.
 *
 * Maintains the run echo, current beam-splitter setting, live histograms,
 * the choice history, and visibility readouts, all driven by the server's
 * message stream. Rendering is a pure function of this state (see render.ts).
 */

import {
  AckMsg,
  Command,
  EventMsg,
  HelloMsg,
  OverlayMsg,
  PROTOCOL,
  PROTOCOL_VERSION,
  RunParams,
  ServerMsg,
  SnapshotMsg,
  StatusMsg,
  encodeCommand,
  parseServerLine,
} from "./protocol.js";
import { FitBasis, LiveHistograms } from "./histogram.js";
import { LineTransport } from "./transport.js";

export type ConnectionStatus = "connecting" | "connected" | "error" | "closed";

export interface ChoiceRecord {
  eventCount: number;
  value: boolean;
}

export interface SessionState {
  status: ConnectionStatus;
  error?: string;
  run?: RunParams;
  binEdges: number[];
  bsIn: boolean;
  eventCount: number;
  finished: boolean;
  running: boolean;
  hist: LiveHistograms | null;
  choiceHistory: ChoiceRecord[];
  overlay: OverlayMsg | null;
  lastToast?: string;
}

type Pending = {
  kind: "ack" | "snapshot" | "overlay" | "status";
  cmd?: string;
  resolve: (msg: ServerMsg) => void;
  reject: (err: Error) => void;
};

export class ConsoleSession {
  readonly state: SessionState;
  private pending: Pending[] = [];
  private updateCbs: ((state: SessionState) => void)[] = [];
  private finishedResolvers: (() => void)[] = [];

  private constructor(private transport: LineTransport) {
    this.state = {
      status: "connecting",
      binEdges: [],
      bsIn: false,
      eventCount: 0,
      finished: false,
      running: false,
      hist: null,
      choiceHistory: [],
      overlay: null,
    };
  }

  /**
   * Handshake: wait for the hello, check protocol and version, subscribe.
   * Rejects (and leaves the session in an error state) on mismatch or a
   * dropped transport, so no stale data is ever shown.
   */
  static connect(transport: LineTransport, timeoutMs = 15000): Promise<ConsoleSession> {
    const session = new ConsoleSession(transport);
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => {
        session.fail("timed out waiting for server hello");
        reject(new Error("hello timeout"));
      }, timeoutMs);

      let greeted = false;
      transport.onLine((line) => {
        let msg: ServerMsg;
        try {
          msg = parseServerLine(line);
        } catch (err) {
          session.state.lastToast = String(err);
          return;
        }
        if (!greeted) {
          if (msg.type !== "hello") return; // ignore stray broadcast pre-hello
          greeted = true;
          clearTimeout(timer);
          if (msg.protocol !== PROTOCOL || msg.version !== PROTOCOL_VERSION) {
            session.fail(`protocol mismatch: server speaks ${msg.protocol} v${msg.version}, ` +
              `client expects ${PROTOCOL} v${PROTOCOL_VERSION}`);
            reject(new Error(session.state.error));
            return;
          }
          session.acceptHello(msg);
          session.sendCommand({ cmd: "subscribe" });
          resolve(session);
          return;
        }
        session.dispatch(msg);
      });
      transport.onClose((err) => {
        if (session.state.status !== "error") {
          session.fail(err ? `connection lost: ${err.message}` : "connection closed");
        }
        if (!greeted) {
          clearTimeout(timer);
          reject(new Error(session.state.error));
        }
      });
    });
  }

  private fail(message: string): void {
    this.state.status = message.includes("closed") ? "closed" : "error";
    this.state.error = message;
    for (const p of this.pending.splice(0)) p.reject(new Error(message));
    this.notify();
  }

  private acceptHello(msg: HelloMsg): void {
    this.state.status = "connected";
    this.state.run = msg.run;
    this.state.binEdges = msg.bin_edges;
    this.state.bsIn = msg.run.bs_in;
    this.state.hist = new LiveHistograms(msg.bin_edges);
    this.notify();
  }

  private dispatch(msg: ServerMsg): void {
    switch (msg.type) {
      case "event":
        this.onEvent(msg);
        break;
      case "ack":
        this.onAck(msg);
        this.settle((p) => p.kind === "ack" && p.cmd === msg.cmd, msg);
        break;
      case "snapshot":
        this.settle((p) => p.kind === "snapshot", msg);
        break;
      case "overlay":
        this.state.overlay = msg as OverlayMsg;
        this.settle((p) => p.kind === "overlay", msg);
        break;
      case "status":
        this.onStatus(msg);
        this.settle((p) => p.kind === "status", msg);
        break;
      case "error":
        // non-blocking: reject the oldest request if one is waiting,
        // otherwise surface as a toast; the stream itself is unaffected
        if (this.pending.length > 0) {
          const p = this.pending.shift()!;
          p.reject(new Error(msg.message));
        } else {
          this.state.lastToast = msg.message;
        }
        break;
    }
    this.notify();
  }

  private settle(match: (p: Pending) => boolean, msg: ServerMsg): void {
    const idx = this.pending.findIndex(match);
    if (idx >= 0) {
      const [p] = this.pending.splice(idx, 1);
      p.resolve(msg);
    }
  }

  private onEvent(msg: EventMsg): void {
    this.state.hist?.add(msg.u, msg.detector);
    this.state.eventCount = this.state.hist?.eventCount ?? this.state.eventCount + 1;
    this.state.bsIn = msg.bs_in;
    if (this.state.run && this.state.eventCount >= this.state.run.n_pairs) {
      this.markFinished();
    }
  }

  private onAck(msg: AckMsg): void {
    if (msg.cmd === "set_bs" && typeof msg.value === "boolean") {
      this.state.bsIn = msg.value;
      if (msg.changed) {
        const at = msg.applied_from_event ?? this.state.eventCount;
        const history = this.state.choiceHistory;
        const last = history[history.length - 1];
        if (last && last.eventCount === at) {
          last.value = msg.value; // coalesce same-count toggles: history stays strictly increasing
        } else {
          history.push({ eventCount: at, value: msg.value });
        }
      }
    }
    if (msg.cmd === "reset") {
      this.state.eventCount = 0;
      this.state.finished = false;
      this.state.choiceHistory = [];
      if (this.state.binEdges.length > 0) {
        this.state.hist = new LiveHistograms(this.state.binEdges);
      }
    }
  }

  private onStatus(msg: StatusMsg): void {
    this.state.running = msg.running;
    this.state.bsIn = msg.bs_in;
    if (msg.finished) this.markFinished();
  }

  private markFinished(): void {
    if (!this.state.finished) {
      this.state.finished = true;
      for (const r of this.finishedResolvers.splice(0)) r();
    }
  }

  private sendCommand(cmd: Command): void {
    this.transport.send(encodeCommand(cmd));
  }

  private request(cmd: Command, kind: Pending["kind"]): Promise<ServerMsg> {
    return new Promise((resolve, reject) => {
      if (this.state.status !== "connected") {
        reject(new Error(this.state.error ?? "not connected"));
        return;
      }
      this.pending.push({ kind, cmd: cmd.cmd, resolve, reject });
      this.sendCommand(cmd);
    });
  }

  /** Request the beam-splitter setting for all not-yet-resolved idlers. */
  async toggleBeamSplitter(desired: boolean): Promise<AckMsg> {
    return (await this.request({ cmd: "set_bs", value: desired }, "ack")) as AckMsg;
  }

  async start(): Promise<void> {
    await this.request({ cmd: "start" }, "ack");
  }

  async pause(): Promise<void> {
    await this.request({ cmd: "pause" }, "ack");
  }

  async reset(seed?: number): Promise<void> {
    await this.request({ cmd: "reset", ...(seed !== undefined ? { seed } : {}) }, "ack");
  }

  async snapshot(): Promise<SnapshotMsg> {
    return (await this.request({ cmd: "snapshot" }, "snapshot")) as SnapshotMsg;
  }

  async fetchOverlay(): Promise<OverlayMsg> {
    return (await this.request({ cmd: "overlay" }, "overlay")) as OverlayMsg;
  }

  /** Rebuild local state from an authoritative snapshot (e.g. after reconnect). */
  async reconcile(): Promise<SnapshotMsg> {
    const snap = await this.snapshot();
    if (!this.state.hist && this.state.binEdges.length > 0) {
      this.state.hist = new LiveHistograms(this.state.binEdges);
    }
    this.state.hist?.load(snap.counts, snap.events);
    this.state.eventCount = snap.events;
    this.state.bsIn = snap.bs_in;
    this.state.running = snap.running;
    this.state.choiceHistory = snap.choice_log
      .filter((c) => c.changed)
      .map((c) => ({ eventCount: c.applied_from_event, value: c.value }));
    if (snap.finished) this.markFinished();
    this.notify();
    return snap;
  }

  waitFinished(): Promise<void> {
    if (this.state.finished) return Promise.resolve();
    return new Promise((resolve) => this.finishedResolvers.push(resolve));
  }

  onUpdate(cb: (state: SessionState) => void): void {
    this.updateCbs.push(cb);
  }

  private notify(): void {
    for (const cb of this.updateCbs) cb(this.state);
  }

  fitBasis(): FitBasis | null {
    return this.state.overlay?.fit_basis ?? null;
  }

  close(): void {
    this.state.status = "closed";
    this.transport.close();
  }
}
