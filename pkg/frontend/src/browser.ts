/**
 * Browser console entry: wires the session to the DOM panels.
 * Loaded by web/index.html through the bridge's /app.js bundle.
 */

import { ConsoleSession } from "./session.js";
import { renderHtml, renderViews } from "./render.js";
import { connectSse } from "./transport-sse.js";

declare global {
  interface Window {
    qeraserBoot: () => void;
  }
}

function byId(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

async function boot(): Promise<void> {
  const statusEl = byId("status");
  const panelsEl = byId("panels");
  const historyEl = byId("history");
  const toggleBtn = byId("toggle") as HTMLButtonElement;
  const startBtn = byId("start") as HTMLButtonElement;
  const pauseBtn = byId("pause") as HTMLButtonElement;
  const resetBtn = byId("reset") as HTMLButtonElement;

  let session: ConsoleSession;
  try {
    statusEl.textContent = "connecting...";
    session = await ConsoleSession.connect(await connectSse());
  } catch (err) {
    statusEl.textContent = `connection failed: ${String(err)} (is the bridge running?)`;
    statusEl.className = "error";
    return;
  }
  await session.fetchOverlay();

  const redraw = (): void => {
    const st = session.state;
    statusEl.className = st.status === "connected" ? "" : "error";
    statusEl.textContent =
      st.status !== "connected"
        ? `${st.status}: ${st.error ?? ""}`
        : `events ${st.eventCount}${st.run ? " / " + st.run.n_pairs : ""} · ` +
          `beam splitter ${st.bsIn ? "IN (erasing)" : "OUT (which-path)"} · ` +
          (st.finished ? "finished" : st.running ? "running" : "paused");
    panelsEl.innerHTML = renderHtml(st);
    historyEl.textContent =
      st.choiceHistory.length === 0
        ? "no choices made yet"
        : "choices: " +
          st.choiceHistory.map((c) => `@${c.eventCount}→${c.value ? "in" : "out"}`).join("  ");
    toggleBtn.textContent = st.bsIn ? "remove beam splitter" : "insert beam splitter";
  };

  session.onUpdate(() => void 0); // state mutates in place; we poll for cheap rendering
  setInterval(redraw, 200);

  toggleBtn.onclick = () => void session.toggleBeamSplitter(!session.state.bsIn).catch(() => void 0);
  startBtn.onclick = () => void session.start().catch(() => void 0);
  pauseBtn.onclick = () => void session.pause().catch(() => void 0);
  resetBtn.onclick = () => void session.reset().catch(() => void 0);

  redraw();
  void renderViews(session.state); // warm the code path so errors surface early
}

window.qeraserBoot = () => void boot();
