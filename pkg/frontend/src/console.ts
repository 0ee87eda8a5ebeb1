/**
 * Terminal console: watch D0 fill in live and play the delayed chooser.
 *
 *   node dist/console.js [host] [port]
 *
 * Keys: b = toggle beam splitter, s = start, p = pause, r = reset, q = quit.
 */

import { ConsoleSession } from "./session.js";
import { renderText } from "./render.js";
import { connectTcp } from "./transport.js";

async function main(): Promise<void> {
  const host = process.argv[2] ?? "127.0.0.1";
  const port = Number(process.argv[3] ?? 7878);

  let session: ConsoleSession;
  try {
    session = await ConsoleSession.connect(await connectTcp(host, port));
  } catch (err) {
    console.error(`cannot connect to ${host}:${port}: ${String(err)}`);
    console.error("start the backend first: qeraser serve --port 7878");
    process.exit(1);
  }

  await session.fetchOverlay();

  const redraw = (): void => {
    process.stdout.write("[2J[H");
    process.stdout.write(renderText(session.state) + "\n");
    process.stdout.write("\n[b] toggle beam splitter  [s] start  [p] pause  [r] reset  [q] quit\n");
  };
  const timer = setInterval(redraw, 250);

  process.stdin.setRawMode?.(true);
  process.stdin.resume();
  process.stdin.on("data", (key) => {
    void (async () => {
      const k = key.toString();
      try {
        if (k === "b") await session.toggleBeamSplitter(!session.state.bsIn);
        else if (k === "s") await session.start();
        else if (k === "p") await session.pause();
        else if (k === "r") await session.reset();
        else if (k === "q" || k === "") {
          clearInterval(timer);
          session.close();
          process.exit(0);
        }
      } catch (err) {
        session.state.lastToast = String(err);
      }
    })();
  });

  redraw();
}

main().catch((err) => {
  console.error(err);
  process.exit(1);
});
