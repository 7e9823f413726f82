/** Synthetic run directories for tests, with real manifest hashes. */

import { createHash } from "crypto";
import { mkdtempSync, readdirSync, readFileSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";

export function sha256(data: string | Buffer): string {
  return createHash("sha256").update(data).digest("hex");
}

export function tempDir(prefix = "frontsim-report-"): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

export function writeManifest(dir: string, engine: string, seeds: number[] = [0]): void {
  const files = readdirSync(dir).filter((f) => f !== "manifest.toml");
  const lines = [
    "[run]",
    'tool = "frontsim"',
    'version = "0.1.0"',
    `command = "test fixture"`,
    `created = "2026-08-08T00:00:00Z"`,
    'host = "test"',
    `seeds = [${seeds.join(", ")}]`,
    "",
    "[params]",
    `engine = "${engine}"`,
    "",
    "[files]",
  ];
  for (const f of files.sort()) {
    lines.push(`"${f}" = "${sha256(readFileSync(join(dir, f)))}"`);
  }
  lines.push("");
  writeFileSync(join(dir, "manifest.toml"), lines.join("\n"));
}

export function csv(header: string[], rows: number[][]): string {
  return [header.join(","), ...rows.map((r) => r.map((v) => String(v)).join(","))].join("\n") + "\n";
}

/** paths.csv with a flat front at a0 (the zero-reactivity reduction). */
export function flatPaths(a0 = 0.0, T = 1.0, k = 11): string {
  const rows: number[][] = [];
  for (let i = 0; i < k; i++) {
    const t = (T * i) / (k - 1);
    rows.push([t, 0.0, a0, 0.0, 0.0]);
  }
  return csv(["t", "I", "A", "C", "Aprime"], rows);
}

export function particlesRun(opts: { snapshots?: number[]; deltas?: number[] } = {}): string {
  const dir = tempDir();
  writeFileSync(join(dir, "paths.csv"), flatPaths());
  const snapTimes = opts.snapshots ?? [0.5, 1.0];
  const rows: number[][] = [];
  for (const t of snapTimes) {
    for (let i = 0; i < 50; i++) rows.push([t, 0.1 + 0.05 * i]);
  }
  if (rows.length > 0) {
    writeFileSync(join(dir, "snapshots.csv"), csv(["t", "x"], rows));
  }
  const diagHeader = ["t", "kill_integral", "mean_local_time", "martingale"];
  const deltas = opts.deltas ?? [];
  for (const d of deltas) diagHeader.push(`flux_rhs_${d}`);
  const diagRows = [0, 0.5, 1.0].map((t) => {
    const base = [t, 0.1 * t, 0.2 * t, 0.0];
    for (const d of deltas) base.push(0.1 * t + 0.02 * Math.sqrt(d));
    return base;
  });
  writeFileSync(join(dir, "diagnostics.csv"), csv(diagHeader, diagRows));
  writeManifest(dir, "particles");
  return dir;
}

export function fbpRun(nTimes = 5, J = 30): string {
  const dir = tempDir();
  writeFileSync(join(dir, "paths.csv"), flatPaths());
  const gridRows: number[][] = [];
  const dy = 6.0 / J;
  for (let j = 0; j < J; j++) gridRows.push([j, (j + 0.5) * dy, j * dy, (j + 1) * dy]);
  writeFileSync(join(dir, "grid.csv"), csv(["j", "center", "edge_lo", "edge_hi"], gridRows));
  const header = ["t"];
  for (let j = 0; j < J; j++) header.push(`y${j}`);
  const rows: number[][] = [];
  for (let i = 0; i < nTimes; i++) {
    const t = 0.1 + (0.9 * i) / Math.max(1, nTimes - 1);
    const row = [t];
    for (let j = 0; j < J; j++) {
      const y = (j + 0.5) * dy;
      row.push(Math.exp((-y * y) / (2 * t)) / Math.sqrt(2 * Math.PI * t));
    }
    rows.push(row);
  }
  writeFileSync(join(dir, "density_000.csv"), csv(header, rows));
  writeFileSync(
    join(dir, "trace.csv"),
    csv(["t", "w0", "Iprime", "mass_residual"], rows.map((r) => [r[0], r[1], 0.0, 0.0]))
  );
  writeManifest(dir, "fbp");
  return dir;
}

export function sweepRun(): string {
  const dir = tempDir();
  const header = ["n", "seed", "ks", "w1", "mass_gap", "sup_A", "sup_I", "M_T", "I_T"];
  const rows: number[][] = [];
  for (const n of [1000, 4000, 16000]) {
    for (let s = 0; s < 4; s++) {
      const scale = 1 / Math.sqrt(n);
      rows.push([n, s, 0.8 * scale * (1 + 0.1 * s), scale, scale / 2, 0.2 * scale, scale, 0.5 * scale, 0.2]);
    }
  }
  writeFileSync(join(dir, "distances.csv"), csv(header, rows));
  writeFileSync(
    join(dir, "report.toml"),
    '[slopes.ks]\nslope = -0.5\nintercept = 0.0\nr2 = 0.99\n'
  );
  writeManifest(dir, "sweep");
  return dir;
}
