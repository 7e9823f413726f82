/** Minimal hand-rolled SVG charting: line/scatter plots with linear or log axes. */

export interface Series {
  x: number[];
  y: number[];
  color: string;
  label: string;
  width?: number;
  dash?: string;
  markers?: boolean;
}

export interface PlotSpec {
  title: string;
  caption: string;
  xlabel: string;
  ylabel: string;
  series: Series[];
  logX?: boolean;
  logY?: boolean;
  vlines?: { x: number; color: string; label?: string }[];
  width?: number;
  height?: number;
}

const MARGIN = { top: 44, right: 24, bottom: 74, left: 64 };

function finite(vals: number[]): number[] {
  return vals.filter((v) => Number.isFinite(v));
}

function niceTicks(lo: number, hi: number, n = 6): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const err = span / (n * step);
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = step * mult;
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / s) * s; v <= hi + 1e-12 * span; v += s) ticks.push(v);
  return ticks;
}

function logTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.floor(Math.log10(lo)); e <= Math.ceil(Math.log10(hi)); e++) {
    const v = Math.pow(10, e);
    if (v >= lo / 1.001 && v <= hi * 1.001) ticks.push(v);
  }
  return ticks.length >= 2 ? ticks : [lo, hi];
}

function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(0);
  return String(Math.round(v * 1e6) / 1e6);
}

function escapeXml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

export function renderPlot(spec: PlotSpec): string {
  const W = spec.width ?? 720;
  const H = spec.height ?? 440;
  const iw = W - MARGIN.left - MARGIN.right;
  const ih = H - MARGIN.top - MARGIN.bottom;
  const xsAll = finite(spec.series.flatMap((s) => s.x).concat((spec.vlines ?? []).map((v) => v.x)));
  const ysAll = finite(spec.series.flatMap((s) => s.y));
  if (xsAll.length === 0 || ysAll.length === 0) throw new Error(`nothing to plot: ${spec.title}`);
  let xlo = Math.min(...xsAll);
  let xhi = Math.max(...xsAll);
  let ylo = Math.min(...ysAll);
  let yhi = Math.max(...ysAll);
  if (spec.logX) {
    if (xlo <= 0) throw new Error("log x-axis needs positive values");
  } else if (xlo === xhi) {
    xlo -= 1;
    xhi += 1;
  }
  if (spec.logY) {
    if (ylo <= 0) throw new Error("log y-axis needs positive values");
  } else {
    if (ylo === yhi) {
      ylo -= 1;
      yhi += 1;
    }
    const pad = 0.06 * (yhi - ylo);
    ylo -= pad;
    yhi += pad;
  }
  const tx = (v: number) =>
    MARGIN.left +
    (spec.logX
      ? ((Math.log10(v) - Math.log10(xlo)) / (Math.log10(xhi) - Math.log10(xlo))) * iw
      : ((v - xlo) / (xhi - xlo)) * iw);
  const ty = (v: number) =>
    MARGIN.top +
    ih -
    (spec.logY
      ? ((Math.log10(v) - Math.log10(ylo)) / (Math.log10(yhi) - Math.log10(ylo))) * ih
      : ((v - ylo) / (yhi - ylo)) * ih);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}" font-family="Helvetica, Arial, sans-serif">`
  );
  parts.push(`<rect width="${W}" height="${H}" fill="white"/>`);
  parts.push(
    `<text x="${W / 2}" y="22" text-anchor="middle" font-size="15" font-weight="bold">${escapeXml(spec.title)}</text>`
  );

  const xticks = spec.logX ? logTicks(xlo, xhi) : niceTicks(xlo, xhi);
  const yticks = spec.logY ? logTicks(ylo, yhi) : niceTicks(ylo, yhi);
  for (const v of xticks) {
    const x = tx(v);
    parts.push(`<line x1="${x}" y1="${MARGIN.top}" x2="${x}" y2="${MARGIN.top + ih}" stroke="#eee"/>`);
    parts.push(
      `<text x="${x}" y="${MARGIN.top + ih + 16}" text-anchor="middle" font-size="11">${fmtTick(v)}</text>`
    );
  }
  for (const v of yticks) {
    const y = ty(v);
    parts.push(`<line x1="${MARGIN.left}" y1="${y}" x2="${MARGIN.left + iw}" y2="${y}" stroke="#eee"/>`);
    parts.push(
      `<text x="${MARGIN.left - 6}" y="${y + 4}" text-anchor="end" font-size="11">${fmtTick(v)}</text>`
    );
  }
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${iw}" height="${ih}" fill="none" stroke="#444"/>`
  );

  for (const vl of spec.vlines ?? []) {
    const x = tx(vl.x);
    parts.push(
      `<line x1="${x}" y1="${MARGIN.top}" x2="${x}" y2="${MARGIN.top + ih}" stroke="${vl.color}" stroke-dasharray="5,3" stroke-width="1.5"/>`
    );
    if (vl.label) {
      parts.push(
        `<text x="${x + 4}" y="${MARGIN.top + 14}" font-size="11" fill="${vl.color}">${escapeXml(vl.label)}</text>`
      );
    }
  }

  for (const s of spec.series) {
    const pts: string[] = [];
    for (let i = 0; i < s.x.length; i++) {
      if (!Number.isFinite(s.x[i]) || !Number.isFinite(s.y[i])) continue;
      if ((spec.logX && s.x[i] <= 0) || (spec.logY && s.y[i] <= 0)) continue;
      pts.push(`${tx(s.x[i]).toFixed(2)},${ty(s.y[i]).toFixed(2)}`);
    }
    if (pts.length === 0) continue;
    parts.push(
      `<polyline points="${pts.join(" ")}" fill="none" stroke="${s.color}" stroke-width="${s.width ?? 1.8}"${s.dash ? ` stroke-dasharray="${s.dash}"` : ""}/>`
    );
    if (s.markers) {
      for (const p of pts) {
        const [px, py] = p.split(",");
        parts.push(`<circle cx="${px}" cy="${py}" r="3" fill="${s.color}"/>`);
      }
    }
  }

  let ly = MARGIN.top + 8;
  for (const s of spec.series) {
    if (!s.label) continue;
    const lx = MARGIN.left + iw - 170;
    parts.push(
      `<line x1="${lx}" y1="${ly}" x2="${lx + 22}" y2="${ly}" stroke="${s.color}" stroke-width="2.4"${s.dash ? ` stroke-dasharray="${s.dash}"` : ""}/>`
    );
    parts.push(`<text x="${lx + 28}" y="${ly + 4}" font-size="11">${escapeXml(s.label)}</text>`);
    ly += 16;
  }

  parts.push(
    `<text x="${MARGIN.left + iw / 2}" y="${H - 40}" text-anchor="middle" font-size="12">${escapeXml(spec.xlabel)}</text>`
  );
  parts.push(
    `<text x="16" y="${MARGIN.top + ih / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 16 ${MARGIN.top + ih / 2})">${escapeXml(spec.ylabel)}</text>`
  );
  parts.push(
    `<text x="${W / 2}" y="${H - 12}" text-anchor="middle" font-size="10" fill="#555">${escapeXml(spec.caption)}</text>`
  );
  parts.push("</svg>");
  return parts.join("\n");
}
