/**
 * Browser bridge: browsers cannot open raw TCP sockets, so this tiny HTTP
 * server relays the line protocol instead. Each page session gets its own
 * TCP connection to the backend:
 *
 *   GET  /            -> the console page
 *   GET  /app.js      -> compiled browser bundle
 *   GET  /events      -> SSE stream; each server line arrives as one event
 *   POST /cmd?sid=... -> one command line forwarded to the backend
 *
 *   node dist/bridge.js [bridge-port] [backend-host] [backend-port]
 */

import http from "node:http";
import net from "node:net";
import { randomUUID } from "node:crypto";
import { readFile } from "node:fs/promises";
import path from "node:path";
import { fileURLToPath } from "node:url";

import { LineDecoder } from "./protocol.js";

const bridgePort = Number(process.argv[2] ?? 8080);
const backendHost = process.argv[3] ?? "127.0.0.1";
const backendPort = Number(process.argv[4] ?? 7878);

const here = path.dirname(fileURLToPath(import.meta.url));
const webRoot = path.resolve(here, "..", "web");

interface Relay {
  socket: net.Socket;
}

const relays = new Map<string, Relay>();

const server = http.createServer((req, res) => {
  void handle(req, res).catch((err) => {
    res.writeHead(500, { "content-type": "text/plain" });
    res.end(String(err));
  });
});

async function handle(req: http.IncomingMessage, res: http.ServerResponse): Promise<void> {
  const url = new URL(req.url ?? "/", `http://${req.headers.host}`);

  if (req.method === "GET" && url.pathname === "/") {
    res.writeHead(200, { "content-type": "text/html; charset=utf-8" });
    res.end(await readFile(path.join(webRoot, "index.html")));
    return;
  }
  if (req.method === "GET" && url.pathname === "/app.js") {
    res.writeHead(200, { "content-type": "text/javascript; charset=utf-8" });
    res.end(await bundle());
    return;
  }

  if (req.method === "GET" && url.pathname === "/events") {
    const sid = randomUUID();
    const socket = net.createConnection({ host: backendHost, port: backendPort });
    socket.setNoDelay(true);
    relays.set(sid, { socket });

    res.writeHead(200, {
      "content-type": "text/event-stream",
      "cache-control": "no-cache",
      connection: "keep-alive",
    });
    res.write(`event: session\ndata: ${JSON.stringify({ sid })}\n\n`);

    const decoder = new LineDecoder();
    socket.on("data", (chunk) => {
      for (const line of decoder.push(chunk.toString("utf-8"))) {
        res.write(`data: ${line}\n\n`);
      }
    });
    const teardown = (): void => {
      relays.delete(sid);
      socket.destroy();
      res.end();
    };
    socket.on("close", teardown);
    socket.on("error", teardown);
    req.on("close", teardown);
    return;
  }

  if (req.method === "POST" && url.pathname === "/cmd") {
    const sid = url.searchParams.get("sid") ?? "";
    const relay = relays.get(sid);
    if (!relay) {
      res.writeHead(404, { "content-type": "text/plain" });
      res.end("unknown session");
      return;
    }
    const chunks: Buffer[] = [];
    for await (const chunk of req) chunks.push(chunk as Buffer);
    relay.socket.write(Buffer.concat(chunks).toString("utf-8").trim() + "\n");
    res.writeHead(204);
    res.end();
    return;
  }

  res.writeHead(404, { "content-type": "text/plain" });
  res.end("not found");
}

/** Concatenate the compiled browser-safe modules into one classic script. */
async function bundle(): Promise<string> {
  const order = ["protocol.js", "histogram.js", "transport-sse.js", "session.js",
                 "render.js", "browser.js"];
  const parts: string[] = [];
  for (const name of order) {
    let src = await readFile(path.join(here, name), "utf-8");
    src = src
      .replace(/^import .*?;$/gm, "")
      .replace(/^export /gm, "")
      .replace(/^\/\/# sourceMappingURL=.*$/gm, "");
    parts.push(`// ---- ${name}\n${src}`);
  }
  return parts.join("\n");
}

server.listen(bridgePort, () => {
  console.log(JSON.stringify({
    bridge: { port: bridgePort, backend: `${backendHost}:${backendPort}` },
  }));
});
