/**
 * Pure views of SessionState: three histogram panels with analytic overlays
 * and visibility readouts, renderable as text (terminal) or HTML (browser).
 * The ungated panel carries the banner the whole exercise is about: it is
 * what the signal screen alone shows, and it never reacts to the choice.
 */

import { Gate, fitFringes } from "./histogram.js";
import { SessionState } from "./session.js";

export interface PanelView {
  gate: Gate;
  title: string;
  banner?: string;
  centers: number[];
  counts: number[];
  overlay: number[] | null; // expected counts per bin at the current event count
  visibility: number | null;
  total: number;
}

export const UNGATED_BANNER =
  "what the signal screen alone shows: identical whatever the choice, whenever it is made";

export function renderViews(state: SessionState): PanelView[] {
  const edges = state.binEdges;
  const centers: number[] = [];
  for (let i = 0; i + 1 < edges.length; i++) centers.push(0.5 * (edges[i] + edges[i + 1]));
  const width = edges.length > 1 ? edges[1] - edges[0] : 1;
  const overlay = state.overlay;
  const basis = overlay?.fit_basis ?? null;
  const bsKey = state.bsIn ? "bs_in" : "bs_out";

  const panels: PanelView[] = [];
  for (const gate of ["ungated", "d1", "d2"] as Gate[]) {
    const counts = state.hist ? state.hist.counts[gate] : new Array(centers.length).fill(0);
    const total = counts.reduce((a, b) => a + b, 0);

    let expected: number[] | null = null;
    if (overlay) {
      if (gate === "ungated") {
        expected = overlay.marginal.map((d) => d * width * state.eventCount);
      } else {
        const cond = overlay.conditionals[bsKey][gate];
        const p = overlay.detector_probability[bsKey][gate];
        expected = cond.map((d) => d * width * state.eventCount * p);
      }
    }

    const fit = basis ? fitFringes(counts, basis) : null;
    panels.push({
      gate,
      title: gate === "ungated" ? "D0 marginal (all signals)" : `D0 gated on ${gate.toUpperCase()}`,
      banner: gate === "ungated" ? UNGATED_BANNER : undefined,
      centers,
      counts,
      overlay: expected,
      visibility: fit?.visibility ?? null,
      total,
    });
  }
  return panels;
}

const BLOCKS = " ▁▂▃▄▅▆▇█";

export function renderText(state: SessionState, columns = 64): string {
  const panels = renderViews(state);
  const lines: string[] = [];
  lines.push(
    `events: ${state.eventCount}` +
      (state.run ? ` / ${state.run.n_pairs}` : "") +
      `   beam splitter: ${state.bsIn ? "IN (erasing)" : "OUT (which-path)"}` +
      `   ${state.finished ? "finished" : state.running ? "running" : "paused"}`,
  );
  if (state.choiceHistory.length > 0) {
    const hist = state.choiceHistory
      .map((c) => `${c.eventCount}:${c.value ? "in" : "out"}`)
      .join(" ");
    lines.push(`choices: ${hist}`);
  }
  for (const panel of panels) {
    const vis = panel.visibility === null ? "n/a" : panel.visibility.toFixed(3);
    lines.push("");
    lines.push(`${panel.title}   [counts ${panel.total}, visibility ${vis}]`);
    if (panel.banner) lines.push(`  ^ ${panel.banner}`);
    lines.push("  " + sparkline(panel.counts, columns));
  }
  if (state.lastToast) lines.push(`note: ${state.lastToast}`);
  return lines.join("\n");
}

function sparkline(counts: number[], columns: number): string {
  const n = counts.length;
  const cols = Math.min(columns, n);
  const per = n / cols;
  const pooled: number[] = [];
  for (let c = 0; c < cols; c++) {
    let acc = 0;
    for (let i = Math.floor(c * per); i < Math.floor((c + 1) * per); i++) acc += counts[i];
    pooled.push(acc);
  }
  const max = Math.max(...pooled, 1);
  return pooled.map((v) => BLOCKS[Math.round((v / max) * 8)]).join("");
}

export function renderHtml(state: SessionState): string {
  const panels = renderViews(state);
  const bars = (panel: PanelView): string => {
    const max = Math.max(...panel.counts, ...(panel.overlay ?? [0]), 1);
    const bar = panel.counts
      .map((v, i) => {
        const h = (100 * v) / max;
        const o = panel.overlay ? (100 * panel.overlay[i]) / max : 0;
        return (
          `<div class="bin">` +
          `<div class="fill" style="height:${h.toFixed(2)}%"></div>` +
          (panel.overlay ? `<div class="mark" style="bottom:${o.toFixed(2)}%"></div>` : "") +
          `</div>`
        );
      })
      .join("");
    const vis = panel.visibility === null ? "n/a" : panel.visibility.toFixed(3);
    return (
      `<section class="panel" data-gate="${panel.gate}">` +
      `<h2>${panel.title}</h2>` +
      (panel.banner ? `<p class="banner">${panel.banner}</p>` : "") +
      `<div class="chart">${bar}</div>` +
      `<p class="readout">counts ${panel.total} &middot; visibility ${vis}</p>` +
      `</section>`
    );
  };
  return panels.map(bars).join("\n");
}
