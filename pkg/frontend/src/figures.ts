/**
 * Figure builders over the documented run-directory table formats.  Each
 * builder returns named SVG documents; captions embed the source manifest
 * hash so every figure is traceable to the exact data it was drawn from.
 */

import { existsSync, readdirSync } from "fs";
import { join } from "path";

import { Manifest } from "./manifest.js";
import { column, readTable, Table } from "./tables.js";
import { renderPlot, Series } from "./svg.js";

export interface Figure {
  name: string;
  svg: string;
  title: string;
}

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

function cap(m: Manifest, extra = ""): string {
  return `run ${m.dir}  |  manifest sha256 ${m.hash.slice(0, 16)}…${extra ? "  |  " + extra : ""}`;
}

export function frontOverlayFigure(m: Manifest, ref?: Manifest): Figure | null {
  const p = join(m.dir, "paths.csv");
  if (!existsSync(p)) return null;
  const t = readTable(p);
  const series: Series[] = [
    { x: column(t, "t"), y: column(t, "A"), color: PALETTE[0], label: "front A" },
    { x: column(t, "t"), y: column(t, "I"), color: PALETTE[1], label: "infected I" },
    { x: column(t, "t"), y: column(t, "C"), color: PALETTE[2], label: "contagiousness C" },
  ];
  if (ref && existsSync(join(ref.dir, "paths.csv"))) {
    const r = readTable(join(ref.dir, "paths.csv"));
    series.push(
      { x: column(r, "t"), y: column(r, "A"), color: PALETTE[0], label: "A (limit)", dash: "6,3" },
      { x: column(r, "t"), y: column(r, "I"), color: PALETTE[1], label: "I (limit)", dash: "6,3" }
    );
  }
  return {
    name: "front_overlay.svg",
    title: "Front and infected proportion",
    svg: renderPlot({
      title: "Front and infected proportion",
      caption: cap(m),
      xlabel: "t",
      ylabel: "value",
      series,
    }),
  };
}

interface DensityRows {
  times: number[];
  centers: number[];
  rows: number[][];
}

export function readDensityRows(dir: string): DensityRows | null {
  const gridPath = join(dir, "grid.csv");
  const chunks = existsSync(dir)
    ? readdirSync(dir).filter((f) => /^density_\d+\.csv$/.test(f)).sort()
    : [];
  if (!existsSync(gridPath) || chunks.length === 0) return null;
  const grid = readTable(gridPath);
  const centers = column(grid, "center");
  const times: number[] = [];
  const rows: number[][] = [];
  for (const c of chunks) {
    const t = readTable(join(dir, c));
    for (const r of t.rows) {
      times.push(r[0]);
      rows.push(r.slice(1));
    }
  }
  return { times, centers, rows };
}

/** Frames of the density with the front position marked; ceil(nodes/stride) frames. */
export function densityAnimationFrames(m: Manifest, stride: number): Figure[] {
  if (stride < 1) throw new Error("stride must be >= 1");
  const dens = readDensityRows(m.dir);
  let frames: Figure[] = [];
  if (dens) {
    const paths = readTable(join(m.dir, "paths.csv"));
    const ts = column(paths, "t");
    const As = column(paths, "A");
    for (let i = 0, f = 0; i < dens.times.length; i += stride, f++) {
      const t = dens.times[i];
      const A = interp(ts, As, t);
      frames.push({
        name: `density_frame_${String(f).padStart(3, "0")}.svg`,
        title: `density at t=${t.toFixed(4)}`,
        svg: renderPlot({
          title: `Density at t = ${t.toFixed(4)}`,
          caption: cap(m, `front A(t) = ${A.toFixed(4)}`),
          xlabel: "x",
          ylabel: "density",
          series: [
            {
              x: dens.centers.map((y) => y + A),
              y: dens.rows[i],
              color: PALETTE[0],
              label: "v(t, ·)",
            },
          ],
          vlines: [{ x: A, color: PALETTE[1], label: "front" }],
        }),
      });
    }
    return frames;
  }
  // particle runs: histogram of snapshot positions
  const snapPath = join(m.dir, "snapshots.csv");
  if (!existsSync(snapPath)) throw new Error(`no density or snapshot tables in ${m.dir}`);
  const snaps = readTable(snapPath);
  const ts = column(snaps, "t");
  const xs = column(snaps, "x");
  const uniq = [...new Set(ts)].sort((a, b) => a - b);
  if (uniq.length === 0) throw new Error(`empty snapshot list in ${m.dir}`);
  const paths = readTable(join(m.dir, "paths.csv"));
  const pt = column(paths, "t");
  const pA = column(paths, "A");
  for (let i = 0, f = 0; i < uniq.length; i += stride, f++) {
    const t = uniq[i];
    const pos = xs.filter((_, k) => ts[k] === t);
    const { centers, heights } = histogram(pos, 40);
    const A = interp(pt, pA, t);
    frames.push({
      name: `density_frame_${String(f).padStart(3, "0")}.svg`,
      title: `empirical density at t=${t.toFixed(4)}`,
      svg: renderPlot({
        title: `Empirical density at t = ${t.toFixed(4)}`,
        caption: cap(m, `front A(t) = ${A.toFixed(4)}, ${pos.length} alive`),
        xlabel: "x",
        ylabel: "density",
        series: [{ x: centers, y: heights, color: PALETTE[0], label: "histogram" }],
        vlines: [{ x: A, color: PALETTE[1], label: "front" }],
      }),
    });
  }
  return frames;
}

function histogram(xs: number[], bins: number): { centers: number[]; heights: number[] } {
  const lo = Math.min(...xs);
  const hi = Math.max(...xs) + 1e-12;
  const h = (hi - lo) / bins;
  const counts = new Array(bins).fill(0);
  for (const x of xs) counts[Math.min(bins - 1, Math.floor((x - lo) / h))]++;
  return {
    centers: counts.map((_, i) => lo + (i + 0.5) * h),
    heights: counts.map((c) => c / (xs.length * h)),
  };
}

function interp(xs: number[], ys: number[], x: number): number {
  if (x <= xs[0]) return ys[0];
  for (let i = 1; i < xs.length; i++) {
    if (x <= xs[i]) {
      const f = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
      return ys[i - 1] * (1 - f) + ys[i] * f;
    }
  }
  return ys[ys.length - 1];
}

/** Log-log convergence figure from a sweep run, slope annotated in the title. */
export function convergenceFigure(m: Manifest): Figure | null {
  const dPath = join(m.dir, "distances.csv");
  const rPath = join(m.dir, "report.toml");
  if (!existsSync(dPath) || !existsSync(rPath)) return null;
  const dist = readTable(dPath);
  const ns = column(dist, "n");
  const byN = new Map<number, { ks: number[]; m2: number[] }>();
  for (let i = 0; i < ns.length; i++) {
    if (!byN.has(ns[i])) byN.set(ns[i], { ks: [], m2: [] });
    byN.get(ns[i])!.ks.push(column(dist, "ks")[i]);
    byN.get(ns[i])!.m2.push(column(dist, "M_T")[i] ** 2);
  }
  const sorted = [...byN.keys()].sort((a, b) => a - b);
  const ksMeans = sorted.map((n) => mean(byN.get(n)!.ks));
  const rms = sorted.map((n) => Math.sqrt(mean(byN.get(n)!.m2)));
  const { slope } = fitLogLog(sorted, ksMeans);
  const { slope: mslope } = fitLogLog(sorted, rms);
  const fitLine = sorted.map((n) => Math.exp(Math.log(ksMeans[0]) + slope * Math.log(n / sorted[0])));
  return {
    name: "convergence.svg",
    title: "Mean-field convergence",
    svg: renderPlot({
      title: `Mean-field convergence: KS slope ${slope.toFixed(3)}, RMS martingale slope ${mslope.toFixed(3)}`,
      caption: cap(m, "log-log; dashed = fitted KS rate"),
      xlabel: "n (particles)",
      ylabel: "distance at T",
      logX: true,
      logY: true,
      series: [
        { x: sorted, y: ksMeans, color: PALETTE[0], label: "mean KS(T)", markers: true },
        { x: sorted, y: rms, color: PALETTE[2], label: "RMS |M_T|", markers: true },
        { x: sorted, y: fitLine, color: PALETTE[0], label: "KS fit", dash: "6,4" },
      ],
    }),
  };
}

function mean(v: number[]): number {
  return v.reduce((a, b) => a + b, 0) / v.length;
}

export function fitLogLog(xs: number[], ys: number[]): { slope: number; intercept: number } {
  const lx = xs.map(Math.log);
  const ly = ys.map(Math.log);
  const mx = mean(lx);
  const my = mean(ly);
  let num = 0;
  let den = 0;
  for (let i = 0; i < lx.length; i++) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) ** 2;
  }
  const slope = num / den;
  return { slope, intercept: my - slope * mx };
}

/** Flux-identity delta sweep from a particle run's diagnostics table. */
export function fluxSweepFigure(m: Manifest): Figure | null {
  const p = join(m.dir, "diagnostics.csv");
  if (!existsSync(p)) return null;
  const t = readTable(p);
  const deltas = t.header
    .filter((h) => h.startsWith("flux_rhs_"))
    .map((h) => Number(h.slice("flux_rhs_".length)));
  if (deltas.length === 0) return null;
  const killT = column(t, "kill_integral").at(-1)!;
  const gaps = deltas.map((d, i) => {
    const col = column(t, `flux_rhs_${d}`);
    return Math.abs(killT - col[col.length - 1]);
  });
  const order = deltas.map((_, i) => i).sort((a, b) => deltas[a] - deltas[b]);
  return {
    name: "flux_identity.svg",
    title: "Boundary-flux mollification",
    svg: renderPlot({
      title: "Boundary-flux identity gap vs mollification width",
      caption: cap(m, "gap at T between local-time and mollified sides"),
      xlabel: "delta",
      ylabel: "|gap(T)|",
      logX: true,
      logY: true,
      series: [
        {
          x: order.map((i) => deltas[i]),
          y: order.map((i) => gaps[i]),
          color: PALETTE[3],
          label: "gap",
          markers: true,
        },
      ],
    }),
  };
}

/** Aronson-envelope visual check: density profile vs fitted Gaussian envelope. */
export function aronsonFigure(m: Manifest): Figure | null {
  const dens = readDensityRows(m.dir);
  if (!dens || dens.times.length === 0) return null;
  const window = dens.times.filter((t) => t >= 0.05);
  if (window.length === 0) return null;
  const tHi = dens.times[dens.times.length - 1];
  const c2 = 1.0 / (4.0 * tHi);
  let c1 = 0;
  for (let i = 0; i < dens.times.length; i++) {
    const t = dens.times[i];
    if (t < 0.05) continue;
    for (let j = 0; j < dens.centers.length; j++) {
      const v = Math.sqrt(t) * dens.rows[i][j] * Math.exp(c2 * dens.centers[j] ** 2);
      if (v > c1) c1 = v;
    }
  }
  const iLast = dens.times.length - 1;
  const t = dens.times[iLast];
  const envelope = dens.centers.map((y) => (c1 / Math.sqrt(t)) * Math.exp(-c2 * y * y));
  return {
    name: "aronson_envelope.svg",
    title: "Gaussian envelope check",
    svg: renderPlot({
      title: `Gaussian envelope at T (c1=${c1.toFixed(3)}, c2=${c2.toFixed(4)})`,
      caption: cap(m, "density never exceeds the fitted envelope"),
      xlabel: "y (moving frame)",
      ylabel: "density",
      series: [
        { x: dens.centers, y: dens.rows[iLast], color: PALETTE[0], label: "w(T, ·)" },
        { x: dens.centers, y: envelope, color: PALETTE[1], label: "envelope", dash: "6,4" },
      ],
    }),
  };
}
