"""Command-line entry point and run orchestration.

Subcommands: simulate, solve, volterra, compare, sweep, report.
Exit codes: 0 success; 1 validation failure; 2 numerical abort; 3 I/O error.
One run writes one immutable directory (data tables + manifest); comparisons
and reports consume prior run directories rather than recomputing.

FRONTSIM_WORKERS controls how many sweep cells run in parallel (default 1);
results are reduced in fixed (n, seed) order, so the worker count never
changes the output.
"""

from __future__ import annotations

import argparse
import os
import shlex
import subprocess
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, fbp, metrics, particles, runio, volterra
from .paths import PathBundle, identity_residual
from .scenario import ScenarioError, load_scenario, loads_scenario, validate_scenario

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3

_HARD_CLAUSES = (
    "sigma_min",
    "sigma_max",
    "kernel_mass",
    "kernel_nonnegative",
    "alpha_positive",
    "horizon_positive",
    "dbar_positive",
    "drift_within_declared",
)


def _gate_scenario(spec, err=None) -> bool:
    """Reject scenarios violating the standing assumptions.

    A reactivity that is identically zero fails the gamma_min clause but is
    admitted with a warning: the zero-killing reduction is a documented
    diagnostic mode (pure reflected diffusions).
    """
    if err is None:
        err = sys.stderr
    rep = validate_scenario(spec)
    ok = True
    for c in rep.clauses:
        if c.passed:
            continue
        if c.name in ("gamma_min", "gamma_max"):
            if spec.reactivity.kind == "constant" and spec.reactivity.params[0] == 0.0:
                print(f"warning: reactivity is identically zero ({c.name})", file=err)
                continue
        print(f"scenario validation failed: {c.name} = {c.value:.6g} {c.message}", file=err)
        ok = False
    for w in rep.warnings:
        print(f"warning: {w}", file=err)
    return ok


def _parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _parse_kv(text: str) -> dict:
    out = {}
    for part in text.split(","):
        if not part.strip():
            continue
        key, val = part.split("=")
        out[key.strip()] = float(val)
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    scenario_text = Path(args.scenario).read_text(encoding="utf-8")
    spec = loads_scenario(scenario_text)
    if not _gate_scenario(spec):
        return EXIT_VALIDATION
    T = args.T if args.T is not None else spec.horizon
    snaps = _parse_floats(args.snapshots) if args.snapshots else [T]
    out = particles.simulate(
        spec,
        n=args.n,
        dt=args.dt,
        T=T,
        seed=args.seed,
        snapshot_times=snaps,
        reflection=args.reflection,
        flux_deltas=_parse_floats(args.flux_deltas) if args.flux_deltas else (),
    )
    outdir = runio.ensure_outdir(args.out)
    runio.write_simulation(outdir, out)
    runio.write_manifest(
        outdir,
        command=_command_line(),
        params={
            "engine": "particles", "n": args.n, "dt": args.dt, "T": T,
            "reflection": args.reflection, "snapshots": snaps,
        },
        seeds=[args.seed],
        scenario_text=scenario_text,
        extra={"I_T": float(out.bundle.I[-1]), "A_T": float(out.bundle.A[-1])},
    )
    print(f"simulate: n={args.n} I_T={out.bundle.I[-1]:.6f} -> {outdir}")
    return EXIT_OK


def cmd_solve(args) -> int:
    scenario_text = Path(args.scenario).read_text(encoding="utf-8")
    spec = loads_scenario(scenario_text)
    if not _gate_scenario(spec):
        return EXIT_VALIDATION
    T = args.T if args.T is not None else spec.horizon
    grid = fbp.SolverGrid(J=args.J, ymax=args.ymax)
    store = _parse_floats(args.store_times) if args.store_times else ()
    field = fbp.solve_fbp(spec, grid, dt=args.dt_pde, T=T, store_times=store)
    outdir = runio.ensure_outdir(args.out)
    runio.write_field(outdir, field)
    runio.write_manifest(
        outdir,
        command=_command_line(),
        params={
            "engine": "fbp", "J": args.J, "dt_pde": args.dt_pde,
            "ymax": args.ymax, "T": T, "t0": field.t0,
        },
        scenario_text=scenario_text,
        extra={
            "I_T": float(field.bundle.I[-1]),
            "A_T": float(field.bundle.A[-1]),
            "max_mass_residual": float(np.max(field.mass_residuals)),
            "min_density": field.min_density,
            "negative_cells": field.negative_cells,
            "far_tail_mass": field.far_tail_mass(),
        },
    )
    print(
        f"solve: J={args.J} I_T={field.bundle.I[-1]:.6f} "
        f"max-residual={np.max(field.mass_residuals):.2e} -> {outdir}"
    )
    return EXIT_OK


def cmd_volterra(args) -> int:
    scenario_text = Path(args.scenario).read_text(encoding="utf-8")
    spec = loads_scenario(scenario_text)
    if not _gate_scenario(spec):
        return EXIT_VALIDATION
    with open(args.paths, "r", encoding="utf-8") as fh:
        bundle = PathBundle.from_table(fh.read())
    g = _parse_kv(args.grid)
    missing = {"dt", "dz", "zmax"} - set(g)
    if missing:
        print(f"--grid needs dt=,dz=,zmax= (missing {sorted(missing)})", file=sys.stderr)
        return EXIT_VALIDATION
    T = args.T if args.T is not None else spec.horizon
    sol = volterra.solve_volterra(spec, bundle, dt=g["dt"], zmax=g["zmax"], dz=g["dz"], T=T)
    outdir = runio.ensure_outdir(args.out)
    runio.write_volterra(outdir, sol)
    runio.write_manifest(
        outdir,
        command=_command_line(),
        params={"engine": "volterra", "T": T, **{k: float(v) for k, v in g.items()}},
        scenario_text=scenario_text,
        extra={"loss_T": float(sol.loss_series[-1]), "mass_T": float(sol.mass()[-1])},
    )
    print(f"volterra: loss_T={sol.loss_series[-1]:.6f} -> {outdir}")
    return EXIT_OK


def cmd_compare(args) -> int:
    sim_dir, pde_dir = Path(args.sim), Path(args.pde)
    with open(sim_dir / "paths.csv", "r", encoding="utf-8") as fh:
        sim_bundle = PathBundle.from_table(fh.read())
    with open(pde_dir / "paths.csv", "r", encoding="utf-8") as fh:
        pde_bundle = PathBundle.from_table(fh.read())
    if abs(sim_bundle.t[-1] - pde_bundle.t[-1]) > 1e-9:
        print(
            f"mismatched horizons: sim T={sim_bundle.t[-1]} vs pde T={pde_bundle.t[-1]}",
            file=sys.stderr,
        )
        return EXIT_VALIDATION
    _, kills = runio.read_table(sim_dir / "kills.csv")
    n = kills.shape[0]
    snaps = runio.read_snapshots(sim_dir, n)
    times, centers, edges, rows = runio.read_field_rows(pde_dir)
    per = []
    for snap in snaps:
        sel = np.where(np.abs(times - snap.t) <= 1e-9)[0]
        if len(sel) == 0:
            print(f"pde run has no stored density at t={snap.t}", file=sys.stderr)
            return EXIT_VALIDATION
        A_t = float(np.interp(snap.t, pde_bundle.t, pde_bundle.A))
        marg = metrics.FieldMarginal.from_moving_frame(edges, rows[sel[0]], A_t)
        ks = metrics.ks_distance(snap, marg)
        try:
            w1, gap = metrics.wasserstein1(snap, marg, mass_tol=np.inf)
        except ValueError:
            w1, gap = float("nan"), float("nan")
        per.append(metrics.SnapshotComparison(snap.t, ks, w1, gap))
    supA, supI = metrics.compare_paths(sim_bundle, pde_bundle)
    outdir = runio.ensure_outdir(args.out)
    runio.write_table(
        outdir / "distances.csv",
        ["t", "ks", "w1", "mass_gap"],
        [np.array([c.t for c in per]), np.array([c.ks for c in per]),
         np.array([c.w1 for c in per]), np.array([c.mass_gap for c in per])],
    )
    runio.write_manifest(
        outdir,
        command=_command_line(),
        params={"engine": "compare", "sim": str(sim_dir), "pde": str(pde_dir)},
        extra={"sup_A": supA, "sup_I": supI},
    )
    print(f"compare: sup|A-A|={supA:.4e} sup|I-I|={supI:.4e} -> {outdir}")
    return EXIT_OK


# -- sweep ------------------------------------------------------------------


def _sweep_cell(task):
    """One (n, seed) cell; runs in a worker process."""
    (scenario_text, n, seed, dt, T, reflection, ref) = task
    spec = loads_scenario(scenario_text)
    out = particles.simulate(
        spec, n=n, dt=dt, T=T, seed=seed, snapshot_times=(T,), reflection=reflection
    )
    snap = out.snapshot_at(T)
    marg = metrics.FieldMarginal.from_moving_frame(ref["edges"], ref["w_T"], ref["A_T"])
    ks = metrics.ks_distance(snap, marg)
    try:
        w1, gap = metrics.wasserstein1(snap, marg, mass_tol=np.inf)
    except ValueError:
        w1, gap = float("nan"), float("nan")
    ref_bundle = PathBundle(ref["t"], ref["I"], ref["A"], ref["C"], ref["Ap"])
    supA, supI = metrics.compare_paths(out.bundle, ref_bundle)
    return {
        "n": n,
        "seed": seed,
        "ks": ks,
        "w1": w1,
        "mass_gap": gap,
        "sup_A": supA,
        "sup_I": supI,
        "M_T": float(out.martingale[-1]),
        "I_T": float(out.bundle.I[-1]),
        "c_identity": identity_residual(out.bundle, spec),
        "paths_table": out.bundle.to_table(),
    }


def run_sweep(
    scenario_text: str,
    n_list,
    seeds: int,
    dt: float,
    T: float,
    J: int,
    dt_pde: float,
    ymax: float,
    reflection: str = "bridge",
    workers: int | None = None,
):
    """FBP reference once, then all (n, seed) cells; aggregates and fits slopes."""
    spec = loads_scenario(scenario_text)
    field = fbp.solve_fbp(
        spec, fbp.SolverGrid(J=J, ymax=ymax), dt=dt_pde, T=T, store_times=(T,)
    )
    b = field.bundle
    ref = {
        "edges": field.grid.edges, "w_T": field.row_at(T), "A_T": float(b.A[-1]),
        "t": b.t, "I": b.I, "A": b.A, "C": b.C, "Ap": b.Aprime,
    }
    tasks = [
        (scenario_text, n, 1000 * i + s, dt, T, reflection, ref)
        for i, n in enumerate(n_list)
        for s in range(seeds)
    ]
    if workers is None:
        workers = int(os.environ.get("FRONTSIM_WORKERS", "1"))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_cell, tasks))
    else:
        rows = [_sweep_cell(t) for t in tasks]

    summary = {}
    for n in n_list:
        cell = [r for r in rows if r["n"] == n]
        summary[n] = {
            "ks_mean": float(np.mean([r["ks"] for r in cell])),
            "supA_mean": float(np.mean([r["sup_A"] for r in cell])),
            "supI_mean": float(np.mean([r["sup_I"] for r in cell])),
            "martingale_rms": float(np.sqrt(np.mean([r["M_T"] ** 2 for r in cell]))),
            "c_identity_max": float(np.max([r["c_identity"] for r in cell])),
        }
    slopes = {}
    if len(n_list) >= 3:
        ns = np.array(n_list, dtype=float)
        for key, name in (
            ("ks_mean", "ks"),
            ("supA_mean", "sup_A"),
            ("martingale_rms", "martingale"),
        ):
            ys = np.array([summary[n][key] for n in n_list])
            if np.all(ys > 0):
                slope, intercept, r2 = metrics.convergence_fit(ns, ys)
                slopes[name] = {"slope": slope, "intercept": intercept, "r2": r2}
    return field, rows, summary, slopes


def cmd_sweep(args) -> int:
    scenario_text = Path(args.scenario).read_text(encoding="utf-8")
    spec = loads_scenario(scenario_text)
    if not _gate_scenario(spec):
        return EXIT_VALIDATION
    n_list = [int(v) for v in args.n.split(",")]
    T = args.T if args.T is not None else spec.horizon
    field, rows, summary, slopes = run_sweep(
        scenario_text, n_list, args.seeds, args.dt, T,
        args.J, args.dt_pde, args.ymax, reflection=args.reflection,
    )
    outdir = runio.ensure_outdir(args.out)
    ref_dir = runio.ensure_outdir(outdir / "reference")
    runio.write_field(ref_dir, field)
    runio.write_manifest(
        ref_dir, command=_command_line(),
        params={"engine": "fbp", "J": args.J, "dt_pde": args.dt_pde, "ymax": args.ymax, "T": T},
        scenario_text=scenario_text,
    )
    for r in rows:
        cell_dir = runio.ensure_outdir(outdir / "cells" / f"n{r['n']}_s{r['seed']}")
        (cell_dir / "paths.csv").write_text(r.pop("paths_table"), encoding="utf-8")
        runio.write_manifest(
            cell_dir, command=_command_line(),
            params={"engine": "particles", "n": r["n"], "dt": args.dt, "T": T,
                    "reflection": args.reflection},
            seeds=[r["seed"]], scenario_text=scenario_text,
        )
    runio.write_table(
        outdir / "distances.csv",
        ["n", "seed", "ks", "w1", "mass_gap", "sup_A", "sup_I", "M_T", "I_T"],
        [np.array([float(r[k]) for r in rows])
         for k in ("n", "seed", "ks", "w1", "mass_gap", "sup_A", "sup_I", "M_T", "I_T")],
    )
    report = {"summary": {}, "slopes": {}}
    for n in n_list:
        report["summary"][f"n{n}"] = summary[n]
    for name, fit in slopes.items():
        report["slopes"][name] = fit
    if len(n_list) < 3:
        report["slopes"]["flag"] = {"note": "fewer than 3 population sizes: no slope fit"}
    with open(outdir / "report.toml", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(runio.toml_dumps(report))
    runio.write_manifest(
        outdir, command=_command_line(),
        params={"engine": "sweep", "n_list": n_list, "seeds": args.seeds, "dt": args.dt,
                "T": T, "J": args.J, "dt_pde": args.dt_pde, "ymax": args.ymax,
                "reflection": args.reflection},
        seeds=list(range(args.seeds)), scenario_text=scenario_text,
    )
    for name, fit in slopes.items():
        print(f"sweep: {name} slope={fit['slope']:.3f} (R2={fit['r2']:.3f})")
    print(f"sweep: wrote {outdir}")
    return EXIT_OK


def cmd_report(args) -> int:
    """Delegate to the report frontend (a separate Node tool) if installed."""
    candidates = []
    if os.environ.get("FRONTSIM_REPORT_BIN"):
        candidates.append(Path(os.environ["FRONTSIM_REPORT_BIN"]))
    here = Path(__file__).resolve()
    for up in here.parents:
        candidates.append(up / "frontend" / "dist" / "src" / "report.js")
        candidates.append(up / "frontend" / "dist" / "report.js")
    script = next((c for c in candidates if c.is_file()), None)
    if script is None:
        print(
            "report frontend not built (expected frontend/dist/report.js; "
            "run `npm run build` in frontend/)",
            file=sys.stderr,
        )
        return EXIT_IO
    cmd = ["node", str(script), "--runs", *args.runs, "--out", args.out,
           "--stride", str(args.stride)]
    proc = subprocess.run(cmd)
    return proc.returncode


def _command_line() -> str:
    return " ".join(shlex.quote(a) for a in sys.argv)


# ---------------------------------------------------------------------------
# parser / dispatch
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="frontsim", description=__doc__)
    p.add_argument("--version", action="version", version=f"frontsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="n-particle Monte Carlo run")
    s.add_argument("--scenario", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--dt", type=float, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--T", type=float, default=None)
    s.add_argument("--snapshots", default="")
    s.add_argument("--reflection", choices=("euler", "bridge"), default="euler")
    s.add_argument("--flux-deltas", default="")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("solve", help="free-boundary finite-volume solve")
    s.add_argument("--scenario", required=True)
    s.add_argument("--J", type=int, required=True)
    s.add_argument("--dt-pde", dest="dt_pde", type=float, required=True)
    s.add_argument("--ymax", type=float, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--T", type=float, default=None)
    s.add_argument("--store-times", default="")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("volterra", help="Volterra integral-equation solve")
    s.add_argument("--scenario", required=True)
    s.add_argument("--paths", required=True, help="PathBundle table (paths.csv)")
    s.add_argument("--grid", required=True, help="dt=..,dz=..,zmax=..")
    s.add_argument("--out", required=True)
    s.add_argument("--T", type=float, default=None)
    s.set_defaults(func=cmd_volterra)

    s = sub.add_parser("compare", help="empirical vs field distances")
    s.add_argument("--sim", required=True)
    s.add_argument("--pde", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("sweep", help="mean-field convergence experiment")
    s.add_argument("--scenario", required=True)
    s.add_argument("--n", required=True, help="comma list, e.g. 1000,4000,16000")
    s.add_argument("--seeds", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--T", type=float, default=None)
    s.add_argument("--J", type=int, default=1000)
    s.add_argument("--dt-pde", dest="dt_pde", type=float, default=5e-4)
    s.add_argument("--ymax", type=float, default=10.0)
    s.add_argument("--reflection", choices=("euler", "bridge"), default="bridge")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("report", help="figures + index page from run directories")
    s.add_argument("--runs", nargs="+", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--stride", type=int, default=8, help="density-frame stride")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (fbp.NumericalAbort, volterra.VolterraAbort) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
