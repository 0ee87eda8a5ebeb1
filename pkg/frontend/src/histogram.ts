/**
 * Client-side histogram state and the visibility readout.
 *
 * The fit reuses the server's own design columns (env, env*sin, env*cos per
 * bin, fetched via the overlay query), so the number shown here is the same
 * envelope-anchored weighted least-squares visibility the analysis layer
 * computes; the console adds no physics of its own.
 */

export type Gate = "ungated" | "d1" | "d2";

export interface FitBasis {
  env: number[];
  env_sin: number[];
  env_cos: number[];
}

export class LiveHistograms {
  readonly edges: number[];
  readonly counts: Record<Gate, number[]>;
  eventCount = 0;

  constructor(edges: number[]) {
    this.edges = edges;
    const bins = edges.length - 1;
    this.counts = {
      ungated: new Array(bins).fill(0),
      d1: new Array(bins).fill(0),
      d2: new Array(bins).fill(0),
    };
  }

  private binOf(u: number): number {
    const { edges } = this;
    if (u < edges[0] || u > edges[edges.length - 1]) return -1;
    // uniform bins: direct index, clamped so u == upper edge lands in the last bin
    const width = (edges[edges.length - 1] - edges[0]) / (edges.length - 1);
    const idx = Math.floor((u - edges[0]) / width);
    return Math.min(idx, edges.length - 2);
  }

  add(u: number, detector: "D1" | "D2"): void {
    const b = this.binOf(u);
    this.eventCount += 1;
    if (b < 0) return;
    this.counts.ungated[b] += 1;
    this.counts[detector === "D1" ? "d1" : "d2"][b] += 1;
  }

  /** Replace local state with an authoritative server snapshot. */
  load(counts: Record<Gate, number[]>, eventCount: number): void {
    for (const gate of ["ungated", "d1", "d2"] as Gate[]) {
      const src = counts[gate];
      for (let i = 0; i < src.length; i++) this.counts[gate][i] = src[i];
    }
    this.eventCount = eventCount;
  }

  total(gate: Gate): number {
    return this.counts[gate].reduce((a, b) => a + b, 0);
  }
}

export interface FringeFit {
  visibility: number;
  phaseRad: number;
  amplitude: number;
}

/**
 * Weighted linear least squares of counts against A*env*(1 + V sin(2pi u + phi)),
 * linear in (A, A V cos phi, A V sin phi). Identical math to the server fit.
 */
export function fitFringes(counts: number[], basis: FitBasis): FringeFit | null {
  const n = counts.length;
  if (n !== basis.env.length) throw new Error("fit basis does not match binning");
  const total = counts.reduce((a, b) => a + b, 0);
  if (total < 1000) return null;

  // normal equations for the 3-column weighted design
  const ata = [
    [0, 0, 0],
    [0, 0, 0],
    [0, 0, 0],
  ];
  const atb = [0, 0, 0];
  for (let i = 0; i < n; i++) {
    const w = 1.0 / Math.max(counts[i], 1.0); // 1/sigma^2 with sigma = sqrt(max(N,1))
    const row = [basis.env[i], basis.env_sin[i], basis.env_cos[i]];
    for (let a = 0; a < 3; a++) {
      atb[a] += w * row[a] * counts[i];
      for (let b = 0; b < 3; b++) ata[a][b] += w * row[a] * row[b];
    }
  }
  const coef = solve3x3(ata, atb);
  if (coef === null || coef[0] <= 0) return null;
  const [a, b, c] = coef;
  const v = Math.hypot(b, c) / a;
  return {
    visibility: Math.min(Math.max(v, 0), 1),
    phaseRad: Math.atan2(c, b),
    amplitude: a,
  };
}

function solve3x3(m: number[][], rhs: number[]): [number, number, number] | null {
  // Gaussian elimination with partial pivoting; tiny fixed-size system.
  const a = m.map((row, i) => [...row, rhs[i]]);
  for (let col = 0; col < 3; col++) {
    let pivot = col;
    for (let r = col + 1; r < 3; r++) {
      if (Math.abs(a[r][col]) > Math.abs(a[pivot][col])) pivot = r;
    }
    if (Math.abs(a[pivot][col]) < 1e-300) return null;
    [a[col], a[pivot]] = [a[pivot], a[col]];
    for (let r = 0; r < 3; r++) {
      if (r === col) continue;
      const f = a[r][col] / a[col][col];
      for (let k = col; k < 4; k++) a[r][k] -= f * a[col][k];
    }
  }
  return [a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]];
}
