/**
 * Report generator: `node report.js --runs <dirs...> --out <dir>`.
 *
 * Verifies every referenced manifest (hash mismatch or missing files refuse
 * the whole report, exit 1 naming the offending path), renders the figures a
 * run type supports, and writes one index.html.  Rendering is strictly
 * read-only over run directories; partial reports (runs contributing no
 * figures) are allowed and marked incomplete.
 */

import { mkdirSync, writeFileSync } from "fs";
import { join, resolve } from "path";

import {
  aronsonFigure,
  convergenceFigure,
  densityAnimationFrames,
  Figure,
  fluxSweepFigure,
  frontOverlayFigure,
} from "./figures.js";
import { IntegrityError, loadManifest, Manifest, verifyManifest } from "./manifest.js";

export interface ReportSpec {
  runs: string[];
  out: string;
  frameStride: number;
}

interface RunSection {
  manifest: Manifest;
  figures: Figure[];
  incomplete: boolean;
}

export function renderReport(spec: ReportSpec): RunSection[] {
  const manifests = spec.runs.map((dir) => loadManifest(resolve(dir)));
  for (const m of manifests) verifyManifest(m); // refuse tampered inputs up front
  mkdirSync(spec.out, { recursive: true });

  const sections: RunSection[] = [];
  for (const m of manifests) {
    const figures: Figure[] = [];
    const push = (f: Figure | null) => {
      if (f) figures.push(f);
    };
    if (m.engine === "sweep") {
      push(convergenceFigure(m));
    } else if (m.engine === "fbp") {
      push(frontOverlayFigure(m));
      push(aronsonFigure(m));
      try {
        figures.push(...densityAnimationFrames(m, spec.frameStride));
      } catch {
        /* no density rows: marked incomplete below */
      }
    } else if (m.engine === "particles") {
      push(frontOverlayFigure(m));
      push(fluxSweepFigure(m));
      try {
        figures.push(...densityAnimationFrames(m, spec.frameStride));
      } catch {
        /* no snapshots: marked incomplete below */
      }
    } else if (m.engine === "volterra" || m.engine === "compare") {
      push(frontOverlayFigure(m));
    }
    sections.push({ manifest: m, figures, incomplete: figures.length === 0 });
  }

  for (const s of sections) {
    const tag = shortTag(s.manifest);
    for (const f of s.figures) {
      writeFileSync(join(spec.out, `${tag}_${f.name}`), f.svg);
    }
  }
  writeFileSync(join(spec.out, "index.html"), indexPage(sections));
  return sections;
}

function shortTag(m: Manifest): string {
  return `${m.engine}_${m.hash.slice(0, 8)}`;
}

function indexPage(sections: RunSection[]): string {
  const body = sections
    .map((s) => {
      const tag = shortTag(s.manifest);
      const figs = s.figures
        .map(
          (f) =>
            `<figure><img src="${tag}_${f.name}" alt="${f.title}"/>` +
            `<figcaption>${f.title} — manifest sha256 <code>${s.manifest.hash}</code></figcaption></figure>`
        )
        .join("\n");
      return (
        `<section><h2>${s.manifest.engine} run <code>${s.manifest.dir}</code>` +
        (s.incomplete ? ' <em class="incomplete">(incomplete: no figures)</em>' : "") +
        `</h2>\n<p>manifest sha256 <code>${s.manifest.hash}</code></p>\n${figs}</section>`
      );
    })
    .join("\n");
  return `<!doctype html>
<html><head><meta charset="utf-8"/><title>frontsim report</title>
<style>
body { font-family: Helvetica, Arial, sans-serif; margin: 2em auto; max-width: 900px; }
figure { margin: 1.5em 0; } img { max-width: 100%; border: 1px solid #ddd; }
figcaption { font-size: 0.85em; color: #555; } .incomplete { color: #b00; }
</style></head>
<body><h1>frontsim report</h1>
${body}
</body></html>
`;
}

export function main(argv: string[]): number {
  const runs: string[] = [];
  let out = "";
  let stride = 1;
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === "--runs") {
      while (i + 1 < argv.length && !argv[i + 1].startsWith("--")) runs.push(argv[++i]);
    } else if (argv[i] === "--out") {
      out = argv[++i];
    } else if (argv[i] === "--stride") {
      stride = Number(argv[++i]);
    }
  }
  if (runs.length === 0 || !out) {
    console.error("usage: report --runs <dir...> --out <dir> [--stride k]");
    return 2;
  }
  try {
    const sections = renderReport({ runs, out, frameStride: stride });
    const total = sections.reduce((a, s) => a + s.figures.length, 0);
    console.log(`report: ${total} figures from ${sections.length} runs -> ${out}`);
    return 0;
  } catch (err) {
    if (err instanceof IntegrityError) {
      console.error(`integrity failure: ${err.message}`);
    } else {
      console.error(`report failed: ${(err as Error).message}`);
    }
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("report.js")) {
  process.exit(main(process.argv.slice(2)));
}
