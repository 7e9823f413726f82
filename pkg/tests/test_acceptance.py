"""Acceptance suite: every primary criterion at its stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see one pass/fail line per
criterion.  Desk scale: n <= 1.6e4 particles, J <= 2000 cells, T <= 2.
"""

import numpy as np
import pytest
from scipy.special import ndtr

from conftest import make_scenario
from frontsim.cli import run_sweep
from frontsim.fbp import SolverGrid, l2_control, solve_fbp
from frontsim.metrics import FieldMarginal, energy_norm_fields, flux_identity_gap, ks_distance
from frontsim.particles import Snapshot, simulate
from frontsim.paths import PathBundle
from frontsim.scenario import dumps_scenario
from frontsim.volterra import aronson_fit, solve_volterra
from oracles import elastic_density, elastic_survival


def criterion(name: str, ok: bool, detail: str):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    print(line)
    assert ok, line


def decoupled_spec(T=1.0):
    return make_scenario(
        b=("affine", (0.5, -0.5)),
        sigma=("constant", (1.0,)),
        gamma=("logistic", (0.2, 1.8, 4.0, 0.25)),
        kernel=("triangular", 1.0, None),
        alpha=0.5,
        a0=0.0,
        horizon=T,
        initial=("truncated-gaussian", (1.0, 0.75)),
    )


@pytest.fixture(scope="module")
def sweep_results(default_scenario):
    """One shared sweep feeds both the mean-field and martingale criteria."""
    import time

    text = dumps_scenario(default_scenario)
    start = time.monotonic()
    field, rows, summary, slopes = run_sweep(
        text,
        [1000, 4000, 16000],
        seeds=20,
        dt=1e-3,
        T=2.0,
        J=1000,
        dt_pde=5e-4,
        ymax=10.0,
        reflection="bridge",
    )
    elapsed = time.monotonic() - start
    return field, rows, summary, slopes, elapsed


def test_conservation_of_mass(default_scenario):
    field = solve_fbp(default_scenario, SolverGrid(J=1000, ymax=10.0), dt=1e-3, T=2.0)
    r = float(np.max(field.mass_residuals))
    out = simulate(default_scenario, n=2000, dt=1e-3, T=2.0, seed=42)
    defect = out.conservation_defect()
    criterion(
        "conservation",
        r <= 1e-8 and defect == 0,
        f"fbp max residual {r:.2e} <= 1e-8; particle identity defect {defect} (exact)",
    )


def test_neumann_reduction():
    spec = make_scenario(
        gamma=("constant", (0.0,)), alpha=0.0, a0=0.0,
        initial=("point-mass", (0.0,)), horizon=1.0,
    )
    grid = SolverGrid(J=2000, ymax=6.0)
    f = solve_fbp(spec, grid, dt=1e-4, T=1.0)
    e = grid.edges
    exact = ((ndtr(e[1:]) - ndtr(e[:-1])) * 2.0) / grid.dy
    l1 = float(np.sum(np.abs(f.row_at(1.0) - exact)) * grid.dy)
    criterion("neumann_reduction", l1 <= 1e-3, f"L1 vs reflected kernel {l1:.2e} <= 1e-3")


def test_robin_reduction():
    gam, y0, T, n = 0.7, 1.0, 1.0, 10000
    spec = make_scenario(
        gamma=("constant", (gam,)), alpha=0.0, a0=0.0,
        initial=("point-mass", (1.0,)), horizon=T,
    )
    grid = SolverGrid(J=2000, ymax=8.0)
    f = solve_fbp(spec, grid, dt=1e-4, T=T)
    sup_fbp = float(np.max(np.abs(f.row_at(T) - elastic_density(grid.centers, T, y0, gam))))

    t = np.linspace(0, T, 9)
    flat = PathBundle(t, 0 * t, 0 * t, 0 * t, 0 * t)
    sol = solve_volterra(spec, flat, dt=5e-3, zmax=8.0, dz=0.02, T=T)
    sup_vol = float(np.max(np.abs(sol.p[-1] - elastic_density(sol.zgrid, T, y0, gam))))

    out = simulate(spec, n=n, dt=5e-4, T=T, seed=11, reflection="bridge")
    s_hat = out.alive_count[-1] / n
    s_exact = elastic_survival(T, y0, gam)
    se = float(np.sqrt(s_exact * (1 - s_exact) / n))
    mc_ok = abs(s_hat - s_exact) <= 3 * se
    criterion(
        "robin_reduction",
        sup_fbp <= 5e-3 and sup_vol <= 5e-3 and mc_ok,
        f"sup err fbp {sup_fbp:.2e}, volterra {sup_vol:.2e} <= 5e-3; "
        f"survival |{s_hat:.4f}-{s_exact:.4f}| = {abs(s_hat - s_exact)/se:.2f} se <= 3 se",
    )


def test_three_engine_agreement():
    spec = decoupled_spec(T=1.0)
    T, n, seeds = 1.0, 10000, 20
    ref = solve_fbp(spec, SolverGrid(J=1000, ymax=7.0), dt=2e-4, T=T, store_times=(T,))
    dec = solve_fbp(spec, SolverGrid(J=1000, ymax=7.0), dt=2e-4, T=T,
                    exogenous=ref.bundle, store_times=(T,))
    sol = solve_volterra(spec, ref.bundle, dt=5e-3, zmax=7.0, dz=0.025, T=T)
    y = dec.grid.centers
    mapped = sol.physical_density(T, dec.bundle.A[-1] + y)
    l1 = float(np.sum(np.abs(mapped - dec.row_at(T))) * dec.grid.dy)

    marg = FieldMarginal.from_moving_frame(dec.grid.edges, dec.row_at(T), float(dec.bundle.A[-1]))
    rng = np.random.default_rng(0)
    null_ks = []
    for _ in range(seeds):
        m = rng.binomial(n, marg.mass)
        null_ks.append(ks_distance(Snapshot(T, np.sort(marg.quantile(rng.random(m))), n), marg))
    mc_ks, surv = [], []
    for s in range(seeds):
        out = simulate(spec, n=n, dt=1e-3, T=T, seed=300 + s, snapshot_times=(T,),
                       reflection="bridge", exogenous=ref.bundle)
        mc_ks.append(ks_distance(out.snapshot_at(T), marg))
        surv.append(out.alive_count[-1] / n)
    ks_bound = float(np.mean(null_ks) + 3 * np.std(null_ks) / np.sqrt(seeds) + 5e-3)
    surv_se = float(np.sqrt(marg.mass * (1 - marg.mass) / n) / np.sqrt(seeds))
    surv_gap = abs(float(np.mean(surv)) - marg.mass)
    ok = l1 <= 5e-3 and float(np.mean(mc_ks)) <= ks_bound and surv_gap <= 3 * surv_se + 2e-3
    criterion(
        "three_engine_agreement",
        ok,
        f"fbp-volterra L1 {l1:.2e} <= 5e-3; MC KS {np.mean(mc_ks):.4f} <= {ks_bound:.4f} "
        f"(perfect-sampling bar); survival gap {surv_gap:.2e} <= {3 * surv_se + 2e-3:.2e}",
    )


def test_mean_field_convergence(sweep_results):
    _, _, summary, slopes, elapsed = sweep_results
    ks = slopes["ks"]
    sa = slopes["sup_A"]
    ok = (
        -0.7 <= ks["slope"] <= -0.3 and ks["r2"] >= 0.9
        and -0.7 <= sa["slope"] <= -0.3 and sa["r2"] >= 0.9
        and elapsed <= 600.0
    )
    criterion(
        "mean_field_convergence",
        ok,
        f"KS slope {ks['slope']:.3f} (R2 {ks['r2']:.3f}), "
        f"sup|A^n-A| slope {sa['slope']:.3f} (R2 {sa['r2']:.3f}) in [-0.7,-0.3], R2 >= 0.9; "
        f"sweep ran in {elapsed:.0f}s <= 600s",
    )


def test_martingale_vanishing(sweep_results):
    _, _, summary, slopes, _ = sweep_results
    m = slopes["martingale"]
    criterion(
        "martingale_vanishing",
        -0.65 <= m["slope"] <= -0.35,
        f"RMS|M^n_T| slope {m['slope']:.3f} in [-0.65,-0.35] "
        f"(levels {[round(summary[n]['martingale_rms'], 5) for n in (1000, 4000, 16000)]})",
    )


def test_boundary_flux_mollification(default_scenario):
    deltas = (0.1, 0.03, 0.01, 0.003, 0.001)
    out = simulate(default_scenario, n=10000, dt=1e-4, T=0.5, seed=17, flux_deltas=deltas)
    gaps = flux_identity_gap(out)
    decreasing = gaps[0.1] > gaps[0.03] > gaps[0.01]
    floor_ratio = gaps[0.001] / gaps[0.003]
    flat = 0.5 <= floor_ratio <= 2.5
    criterion(
        "boundary_flux_mollification",
        decreasing and flat,
        f"gaps {gaps[0.1]:.4f} > {gaps[0.03]:.4f} > {gaps[0.01]:.4f} strictly decreasing; "
        f"floor ratio gap(0.001)/gap(0.003) = {floor_ratio:.2f} in [0.5, 2.5] (flat)",
    )


def test_aronson_envelope_and_l2(default_scenario):
    runs = {}
    for J, dt in ((700, 1e-3), (1400, 5e-4)):
        runs[J] = solve_fbp(default_scenario, SolverGrid(J=J, ymax=14.0), dt=dt, T=2.0)
    fits = {
        J: aronson_fit(f.stored_times, f.grid.centers, f.w, (0.05, 2.0), 1.0)
        for J, f in runs.items()
    }
    c1a, c2a, _ = fits[700]
    c1b, c2b, _ = fits[1400]
    c1_drift = abs(c1b - c1a) / c1a
    sup_a = l2_control(runs[700], t_lo=1e-3)
    sup_b = l2_control(runs[1400], t_lo=1e-3)
    l2_drift = abs(sup_b - sup_a) / sup_a
    ok = (
        np.isfinite(c1a) and c1a > 0 and c2a == c2b
        and c1_drift < 0.2 and np.isfinite(sup_a) and l2_drift < 0.2
    )
    criterion(
        "aronson_envelope_and_l2",
        ok,
        f"(c1, c2) = ({c1a:.3f}, {c2a:.4f}), c1 drift {c1_drift:.1%} < 20%; "
        f"sup_t sqrt(t)||w||_2^2 = {sup_a:.3f}, drift {l2_drift:.1%} < 20%",
    )


def test_energy_norm_regression(default_scenario):
    levels = ((250, 8e-4), (500, 4e-4), (1000, 2e-4))
    ref = solve_fbp(default_scenario, SolverGrid(J=2000, ymax=10.0), dt=1e-4, T=2.0)
    energies = []
    for J, dt in levels:
        f = solve_fbp(default_scenario, SolverGrid(J=J, ymax=10.0), dt=dt, T=2.0)
        energies.append(
            energy_norm_fields(f.grid.edges, f.row_at(2.0), ref.grid.edges, ref.row_at(2.0))
        )
    monotone = energies[0] > energies[1] > energies[2]
    criterion(
        "energy_norm_regression",
        monotone,
        "||F^Delta_T||_2 vs finest reference decreases monotonically: "
        + " > ".join(f"{e:.2e}" for e in energies),
    )
