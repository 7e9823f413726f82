"""Run directories, columnar tables, and reproducibility manifests.

One run = one immutable directory: data files are columnar CSV with a single
header line and repr-formatted floats (so identical inputs reproduce byte-
identical files), plus one manifest.toml recording the tool version, the
scenario content hash, the command line, seeds and grid parameters, and a
sha256 index of every emitted file.
"""

from __future__ import annotations

import hashlib
import platform
import time
from pathlib import Path

import numpy as np
import tomli

from . import __version__

DENSITY_CHUNK_ROWS = 256


def fmt(v) -> str:
    return repr(float(v))


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_table(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    n = len(columns[0])
    for c in columns:
        if len(c) != n:
            raise ValueError("ragged columns")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for k in range(n):
            fh.write(",".join(fmt(c[k]) for c in columns) + "\n")


def read_table(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return header, data


# ---------------------------------------------------------------------------
# minimal TOML writer (canonical: insertion order, repr floats)
# ---------------------------------------------------------------------------


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v)} to TOML")


def _toml_key(k: str) -> str:
    if k and all(c.isalnum() or c in "_-" for c in k):
        return k
    return '"' + k.replace("\\", "\\\\").replace('"', '\\"') + '"'


def toml_dumps(doc: dict) -> str:
    """Sections of scalars/lists; one nesting level of sub-tables."""
    out = []
    for section, body in doc.items():
        out.append(f"[{_toml_key(section)}]")
        for key, val in body.items():
            if isinstance(val, dict):
                continue
            out.append(f"{_toml_key(key)} = {_toml_value(val)}")
        out.append("")
        for key, val in body.items():
            if isinstance(val, dict):
                out.append(f"[{_toml_key(section)}.{_toml_key(key)}]")
                for k2, v2 in val.items():
                    out.append(f"{_toml_key(k2)} = {_toml_value(v2)}")
                out.append("")
    return "\n".join(out) + ("" if out and out[-1] == "" else "\n")


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------


def write_manifest(
    outdir: Path,
    command: str,
    params: dict,
    seeds=(),
    scenario_text: str | None = None,
    extra: dict | None = None,
) -> Path:
    outdir = Path(outdir)
    files = sorted(
        p for p in outdir.iterdir() if p.is_file() and p.name != "manifest.toml"
    )
    doc = {
        "run": {
            "tool": "frontsim",
            "version": __version__,
            "command": command,
            "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "host": platform.node() or "unknown",
            "seeds": [int(s) for s in seeds],
        },
        "params": {k: _coerce(v) for k, v in params.items()},
        "files": {p.name: sha256_file(p) for p in files},
    }
    if scenario_text is not None:
        doc["run"]["scenario_sha256"] = hashlib.sha256(
            scenario_text.encode("utf-8")
        ).hexdigest()
    if extra:
        doc["results"] = {k: _coerce(v) for k, v in extra.items()}
    path = outdir / "manifest.toml"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(toml_dumps(doc))
    return path


def _coerce(v):
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (list, tuple)):
        return [_coerce(x) for x in v]
    return v


def load_manifest(outdir: Path) -> dict:
    with open(Path(outdir) / "manifest.toml", "rb") as fh:
        return tomli.load(fh)


def verify_manifest(outdir: Path) -> list[str]:
    """Names of files whose hash no longer matches the manifest (empty = ok)."""
    outdir = Path(outdir)
    doc = load_manifest(outdir)
    bad = []
    for name, digest in doc.get("files", {}).items():
        p = outdir / name
        if not p.is_file() or sha256_file(p) != digest:
            bad.append(name)
    return bad


# ---------------------------------------------------------------------------
# engine output writers / readers
# ---------------------------------------------------------------------------


def ensure_outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_simulation(outdir: Path, out) -> None:
    """SimulationOutput -> paths.csv, snapshots.csv, kills.csv, diagnostics.csv."""
    outdir = Path(outdir)
    b = out.bundle
    write_table(outdir / "paths.csv", ["t", "I", "A", "C", "Aprime"], [b.t, b.I, b.A, b.C, b.Aprime])
    ts, xs = [], []
    for snap in out.snapshots:
        ts.append(np.full(len(snap.positions), snap.t))
        xs.append(snap.positions)
    if ts:
        write_table(outdir / "snapshots.csv", ["t", "x"],
                    [np.concatenate(ts), np.concatenate(xs)])
    write_table(outdir / "kills.csv", ["i", "tau"],
                [np.arange(out.n, dtype=float), out.tau])
    header = ["t", "kill_integral", "mean_local_time", "martingale"]
    cols = [b.t, out.kill_integral, out.mean_local_time, out.martingale]
    for d in sorted(out.flux_rhs):
        header.append(f"flux_rhs_{d}")
        cols.append(out.flux_rhs[d])
    write_table(outdir / "diagnostics.csv", header, cols)


def read_snapshots(outdir: Path, n: int):
    from .particles import Snapshot

    header, data = read_table(Path(outdir) / "snapshots.csv")
    snaps = []
    for t in np.unique(data[:, 0]):
        pos = np.sort(data[data[:, 0] == t, 1])
        snaps.append(Snapshot(float(t), pos, n))
    return snaps


def write_field(outdir: Path, field) -> None:
    """DensityField -> paths.csv, grid.csv, trace.csv, chunked density tables."""
    outdir = Path(outdir)
    g = field.grid
    b = field.bundle
    write_table(outdir / "paths.csv", ["t", "I", "A", "C", "Aprime"], [b.t, b.I, b.A, b.C, b.Aprime])
    write_table(
        outdir / "grid.csv",
        ["j", "center", "edge_lo", "edge_hi"],
        [np.arange(g.J, dtype=float), g.centers, g.edges[:-1], g.edges[1:]],
    )
    write_table(
        outdir / "trace.csv",
        ["t", "w0", "Iprime", "mass_residual"],
        [field.times, field.w0, field.Iprime, field.mass_residuals],
    )
    header = ["t"] + [f"y{j}" for j in range(g.J)]
    for c, lo in enumerate(range(0, len(field.stored_times), DENSITY_CHUNK_ROWS)):
        hi = min(lo + DENSITY_CHUNK_ROWS, len(field.stored_times))
        cols = [field.stored_times[lo:hi]] + [field.w[lo:hi, j] for j in range(g.J)]
        write_table(outdir / f"density_{c:03d}.csv", header, cols)


def read_field_rows(outdir: Path):
    """(times, centers, edges, rows) from a solve run directory."""
    outdir = Path(outdir)
    _, gdata = read_table(outdir / "grid.csv")
    centers = gdata[:, 1]
    edges = np.concatenate([gdata[:, 2], gdata[-1:, 3]])
    times, rows = [], []
    for chunk in sorted(outdir.glob("density_*.csv")):
        _, data = read_table(chunk)
        times.append(data[:, 0])
        rows.append(data[:, 1:])
    return np.concatenate(times), centers, edges, np.vstack(rows)


def write_volterra(outdir: Path, sol) -> None:
    outdir = Path(outdir)
    write_table(outdir / "zgrid.csv", ["j", "z"],
                [np.arange(len(sol.zgrid), dtype=float), sol.zgrid])
    write_table(
        outdir / "trace.csv",
        ["t", "p0", "loss", "mass"],
        [sol.times, sol.trace, sol.loss_series, sol.mass()],
    )
    header = ["t"] + [f"z{j}" for j in range(len(sol.zgrid))]
    for c, lo in enumerate(range(0, len(sol.times), DENSITY_CHUNK_ROWS)):
        hi = min(lo + DENSITY_CHUNK_ROWS, len(sol.times))
        cols = [sol.times[lo:hi]] + [sol.p[lo:hi, j] for j in range(len(sol.zgrid))]
        write_table(outdir / f"density_{c:03d}.csv", header, cols)
