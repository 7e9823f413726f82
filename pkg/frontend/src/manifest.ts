/** Manifest loading and integrity verification for run directories. */

import { createHash } from "crypto";
import { existsSync, readFileSync } from "fs";
import { join } from "path";

import { parseToml, TomlTable } from "./tables.js";

export interface Manifest {
  dir: string;
  engine: string;
  hash: string; // sha256 of manifest.toml itself, embedded in figure captions
  doc: TomlTable;
  files: Record<string, string>;
}

export class IntegrityError extends Error {
  constructor(public path: string, message: string) {
    super(message);
  }
}

export function sha256(data: Buffer | string): string {
  return createHash("sha256").update(data).digest("hex");
}

export function loadManifest(dir: string): Manifest {
  const path = join(dir, "manifest.toml");
  if (!existsSync(path)) {
    throw new IntegrityError(path, `missing manifest: ${path}`);
  }
  const text = readFileSync(path, "utf-8");
  const doc = parseToml(text);
  const run = (doc["run"] ?? {}) as TomlTable;
  const params = (doc["params"] ?? {}) as TomlTable;
  const files = (doc["files"] ?? {}) as Record<string, string>;
  return {
    dir,
    engine: String(params["engine"] ?? run["command"] ?? "unknown"),
    hash: sha256(text),
    doc,
    files,
  };
}

/** Verify every hashed file; throws IntegrityError naming the first offender. */
export function verifyManifest(m: Manifest): void {
  for (const [name, digest] of Object.entries(m.files)) {
    const p = join(m.dir, name);
    if (!existsSync(p)) {
      throw new IntegrityError(p, `file listed in manifest is missing: ${p}`);
    }
    const actual = sha256(readFileSync(p));
    if (actual !== digest) {
      throw new IntegrityError(p, `hash mismatch (tampered?): ${p}`);
    }
  }
}
