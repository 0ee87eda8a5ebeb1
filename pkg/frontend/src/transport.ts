/**
 * Transport abstraction: anything that moves newline-framed text both ways.
 *
 * Node sessions use a raw TCP socket; the browser page uses the SSE+POST
 * bridge. The session state machine is identical over either.
 */

export interface LineTransport {
  send(line: string): void;
  onLine(cb: (line: string) => void): void;
  onClose(cb: (err?: Error) => void): void;
  close(): void;
}

export async function connectTcp(host: string, port: number): Promise<LineTransport> {
  const net = await import("node:net");
  const { LineDecoder } = await import("./protocol.js");

  return new Promise((resolve, reject) => {
    const socket = net.createConnection({ host, port }, () => resolve(transport));
    socket.setNoDelay(true);
    const decoder = new LineDecoder();
    let lineCb: (line: string) => void = () => {};
    let closeCb: (err?: Error) => void = () => {};

    socket.on("data", (chunk) => {
      for (const line of decoder.push(chunk.toString("utf-8"))) lineCb(line);
    });
    socket.on("error", (err) => {
      closeCb(err);
      reject(err);
    });
    socket.on("close", () => closeCb());

    const transport: LineTransport = {
      send: (line) => socket.write(line),
      onLine: (cb) => {
        lineCb = cb;
      },
      onClose: (cb) => {
        closeCb = cb;
      },
      close: () => socket.destroy(),
    };
  });
}

/** Loopback transport for unit tests: scripted server behavior. */
export class FakeTransport implements LineTransport {
  sent: string[] = [];
  private lineCb: (line: string) => void = () => {};
  private closeCb: (err?: Error) => void = () => {};
  onSend: (line: string) => void = () => {};

  send(line: string): void {
    this.sent.push(line);
    this.onSend(line);
  }

  onLine(cb: (line: string) => void): void {
    this.lineCb = cb;
  }

  onClose(cb: (err?: Error) => void): void {
    this.closeCb = cb;
  }

  close(): void {
    this.closeCb();
  }

  /** Test hook: deliver a server message. */
  emit(msg: object): void {
    this.lineCb(JSON.stringify(msg));
  }

  emitRaw(line: string): void {
    this.lineCb(line);
  }

  drop(err?: Error): void {
    this.closeCb(err);
  }
}
