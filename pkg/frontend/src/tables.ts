/**
 * Readers for frontsim run-directory files: columnar CSV tables with one
 * header line, and the canonical TOML subset emitted for manifests and
 * reports (sections, one level of sub-tables, floats/ints/strings/lists,
 * quoted keys).
 */

import { readFileSync } from "fs";

export interface Table {
  header: string[];
  rows: number[][];
}

export function readTable(path: string): Table {
  const text = readFileSync(path, "utf-8");
  return parseTable(text, path);
}

export function parseTable(text: string, label = "<table>"): Table {
  const lines = text.trim().split(/\r?\n/);
  if (lines.length < 1) throw new Error(`${label}: empty table`);
  const header = lines[0].split(",").map((s) => s.trim());
  const rows: number[][] = [];
  for (let i = 1; i < lines.length; i++) {
    if (!lines[i].trim()) continue;
    const vals = lines[i].split(",").map((v) => Number(v));
    if (vals.length !== header.length || vals.some((v) => Number.isNaN(v) && !lines[i].includes("nan"))) {
      throw new Error(`${label}:${i + 1}: malformed row`);
    }
    rows.push(vals);
  }
  return { header, rows };
}

export function column(t: Table, name: string): number[] {
  const j = t.header.indexOf(name);
  if (j < 0) throw new Error(`missing column ${name}`);
  return t.rows.map((r) => r[j]);
}

export type TomlValue = string | number | boolean | TomlValue[];
export type TomlTable = { [key: string]: TomlValue | TomlTable };

/** Parser for the canonical TOML subset written by the core package. */
export function parseToml(text: string): TomlTable {
  const root: TomlTable = {};
  let current: TomlTable = root;
  for (const raw of text.split(/\r?\n/)) {
    const line = raw.trim();
    if (!line || line.startsWith("#")) continue;
    const section = line.match(/^\[(.+)\]$/);
    if (section) {
      const parts = splitKeyPath(section[1]);
      let node = root;
      for (const p of parts) {
        if (!(p in node)) node[p] = {};
        node = node[p] as TomlTable;
      }
      current = node;
      continue;
    }
    const eq = findTopLevelEquals(line);
    if (eq < 0) throw new Error(`bad TOML line: ${line}`);
    const key = splitKeyPath(line.slice(0, eq).trim());
    const value = parseValue(line.slice(eq + 1).trim());
    let node = current;
    for (let i = 0; i < key.length - 1; i++) {
      if (!(key[i] in node)) node[key[i]] = {};
      node = node[key[i]] as TomlTable;
    }
    node[key[key.length - 1]] = value;
  }
  return root;
}

function splitKeyPath(text: string): string[] {
  const parts: string[] = [];
  let cur = "";
  let quoted = false;
  for (let i = 0; i < text.length; i++) {
    const c = text[i];
    if (c === '"') {
      quoted = !quoted;
      continue;
    }
    if (c === "\\" && quoted) {
      cur += text[++i];
      continue;
    }
    if (c === "." && !quoted) {
      parts.push(cur.trim());
      cur = "";
      continue;
    }
    cur += c;
  }
  parts.push(cur.trim());
  return parts;
}

function findTopLevelEquals(line: string): number {
  let quoted = false;
  for (let i = 0; i < line.length; i++) {
    if (line[i] === '"') quoted = !quoted;
    else if (line[i] === "=" && !quoted) return i;
  }
  return -1;
}

function parseValue(text: string): TomlValue {
  if (text.startsWith('"')) {
    return text.slice(1, -1).replace(/\\"/g, '"').replace(/\\\\/g, "\\");
  }
  if (text === "true") return true;
  if (text === "false") return false;
  if (text.startsWith("[")) {
    const inner = text.slice(1, -1).trim();
    if (!inner) return [];
    return splitTopLevel(inner).map((v) => parseValue(v.trim()));
  }
  const num = Number(text);
  if (Number.isNaN(num)) throw new Error(`bad TOML value: ${text}`);
  return num;
}

function splitTopLevel(text: string): string[] {
  const out: string[] = [];
  let depth = 0;
  let quoted = false;
  let cur = "";
  for (const c of text) {
    if (c === '"') quoted = !quoted;
    if (!quoted) {
      if (c === "[") depth++;
      if (c === "]") depth--;
      if (c === "," && depth === 0) {
        out.push(cur);
        cur = "";
        continue;
      }
    }
    cur += c;
  }
  if (cur.trim()) out.push(cur);
  return out;
}
