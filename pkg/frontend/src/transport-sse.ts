/**
 * Browser transport: downstream lines over Server-Sent Events, upstream
 * command lines over POST /cmd. Carries exactly the same line protocol as
 * the raw socket; the bridge does no interpretation.
 */

import { LineTransport } from "./transport.js";

export function connectSse(base = ""): Promise<LineTransport> {
  return new Promise((resolve, reject) => {
    const source = new EventSource(`${base}/events`);
    let sid: string | null = null;
    let lineCb: (line: string) => void = () => {};
    let closeCb: (err?: Error) => void = () => {};

    const transport: LineTransport = {
      send: (line) => {
        if (sid === null) return;
        void fetch(`${base}/cmd?sid=${encodeURIComponent(sid)}`, {
          method: "POST",
          body: line,
        });
      },
      onLine: (cb) => {
        lineCb = cb;
      },
      onClose: (cb) => {
        closeCb = cb;
      },
      close: () => source.close(),
    };

    source.addEventListener("session", (ev) => {
      sid = (JSON.parse((ev as MessageEvent).data) as { sid: string }).sid;
      resolve(transport);
    });
    source.onmessage = (ev) => lineCb(ev.data);
    source.onerror = () => {
      const err = new Error("event stream dropped");
      if (sid === null) reject(err);
      closeCb(err);
    };
  });
}
