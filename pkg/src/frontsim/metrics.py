"""Verification harness: distances, flux-identity gaps, energy norms, rate fits.

Measures of agreement between the three engines.  Empirical measures are
snapshots of sorted alive positions; fields supply a survivor function built
from cell averages (piecewise linear).  All comparisons happen through
survivor/CDF representations so that sub-probability masses are handled
explicitly rather than silently renormalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .particles import SimulationOutput, Snapshot


# ---------------------------------------------------------------------------
# survivor-function representations
# ---------------------------------------------------------------------------


@dataclass
class FieldMarginal:
    """A density row on a cell grid, read as a measure in physical coordinates.

    edges are the J+1 cell edges of the moving-frame grid shifted by the front
    position; w holds cell-average densities, so the survivor function is
    piecewise linear in x.
    """

    edges: np.ndarray
    w: np.ndarray

    @staticmethod
    def from_moving_frame(ygrid_edges: np.ndarray, w: np.ndarray, front: float) -> "FieldMarginal":
        return FieldMarginal(np.asarray(ygrid_edges, float) + front, np.asarray(w, float))

    @property
    def mass(self) -> float:
        return float(np.sum(self.w * np.diff(self.edges)))

    def survivor(self, x) -> np.ndarray:
        """Mass strictly above x (piecewise-linear, exact for cell averages)."""
        x = np.asarray(x, dtype=float)
        cell_mass = self.w * np.diff(self.edges)
        tail = np.concatenate([np.cumsum(cell_mass[::-1])[::-1], [0.0]])
        idx = np.clip(np.searchsorted(self.edges, x, side="right") - 1, -1, len(self.w))
        out = np.empty_like(x)
        below = idx < 0
        above = idx >= len(self.w)
        mid = ~(below | above)
        out[below] = tail[0]
        out[above] = 0.0
        i = idx[mid]
        frac = (x[mid] - self.edges[i]) / (self.edges[i + 1] - self.edges[i])
        out[mid] = tail[i] - frac * cell_mass[i] + (tail[i] - tail[i + 1]) * 0.0
        out[mid] = tail[i] - frac * cell_mass[i]
        return out

    def quantile(self, u) -> np.ndarray:
        """Inverse of the normalized CDF (mass conditioned to 1)."""
        cell_mass = self.w * np.diff(self.edges)
        total = np.sum(cell_mass)
        cdf = np.concatenate([[0.0], np.cumsum(cell_mass)]) / total
        return np.interp(np.asarray(u, dtype=float), cdf, self.edges)


def ks_distance(snapshot: Snapshot, field: FieldMarginal) -> float:
    """sup_x |empirical survivor - field survivor|, in physical coordinates.

    Evaluated at both sides of every particle position plus the field's cell
    edges; the empirical survivor is (count > x)/n so the candidate extremes
    are exactly these points.
    """
    pos = snapshot.positions
    n = snapshot.n
    xs = np.concatenate([pos, field.edges])
    xs = np.unique(xs)
    fs = field.survivor(xs)
    emp = (len(pos) - np.searchsorted(pos, xs, side="right")) / n
    gap = np.max(np.abs(emp - fs)) if len(xs) else 0.0
    # left limits at particle positions: empirical jumps there
    emp_left = (len(pos) - np.searchsorted(pos, pos, side="left")) / n
    gap_left = np.max(np.abs(emp_left - field.survivor(pos))) if len(pos) else 0.0
    return float(max(gap, gap_left))


def wasserstein1(snapshot: Snapshot, field: FieldMarginal, mass_tol: float | None = None):
    """W1 between the measures conditioned to unit mass, plus the mass gap.

    Returns (w1, mass_gap).  Rejects null measures; by default requires the
    raw masses to agree within 2/n, the particle engine's resolution.
    """
    alive = len(snapshot.positions)
    if alive == 0 or field.mass <= 0:
        raise ValueError("wasserstein1 needs two non-null measures")
    m_emp = alive / snapshot.n
    m_field = field.mass
    gap = abs(m_emp - m_field)
    if mass_tol is None:
        mass_tol = 2.0 / snapshot.n
    if gap > mass_tol:
        raise ValueError(f"mass mismatch {gap:.3g} exceeds tolerance {mass_tol:.3g}")
    # integrated |difference of normalized CDFs|, exact per breakpoint panel
    xs = np.unique(np.concatenate([snapshot.positions, field.edges]))
    F_emp = np.searchsorted(snapshot.positions, xs, side="right") / alive
    F_fld = 1.0 - field.survivor(xs) / m_field
    total = 0.0
    for i in range(len(xs) - 1):
        a, b = xs[i], xs[i + 1]
        fa = F_emp[i] - F_fld[i]
        fb = F_emp[i] - F_fld[i + 1]  # empirical cdf constant on (x_i, x_{i+1})
        total += _abs_linear_integral(fa, fb, b - a)
    return float(total), float(gap)


def _abs_linear_integral(fa, fb, h):
    """int_0^h |f| for f linear with f(0)=fa, f(h)=fb."""
    if h <= 0:
        return 0.0
    if fa * fb >= 0:
        return 0.5 * abs(fa + fb) * h
    root = h * abs(fa) / (abs(fa) + abs(fb))
    return 0.5 * (abs(fa) * root + abs(fb) * (h - root))


def w1_discrete(xs, ys) -> float:
    """W1 between two equal-mass discrete uniform samples (for property tests)."""
    xs = np.sort(np.asarray(xs, float))
    ys = np.sort(np.asarray(ys, float))
    grid = np.unique(np.concatenate([xs, ys]))
    Fx = np.searchsorted(xs, grid, side="right") / len(xs)
    Fy = np.searchsorted(ys, grid, side="right") / len(ys)
    return float(np.sum(np.abs(Fx - Fy)[:-1] * np.diff(grid)))


def ks_discrete(xs, ys) -> float:
    """Two-sample Kolmogorov distance between discrete uniform samples."""
    xs = np.sort(np.asarray(xs, float))
    ys = np.sort(np.asarray(ys, float))
    grid = np.unique(np.concatenate([xs, ys]))
    Fx = np.searchsorted(xs, grid, side="right") / len(xs)
    Fy = np.searchsorted(ys, grid, side="right") / len(ys)
    return float(np.max(np.abs(Fx - Fy)))


# ---------------------------------------------------------------------------
# martingale and boundary-flux diagnostics
# ---------------------------------------------------------------------------


def flux_identity_gap(out: SimulationOutput, pure: bool = False) -> dict:
    """|local-time side - mollified side| at t = T, per delta.

    Compares (1/n) sum_i int 1_{s<tau} gamma d ell  against
    int gamma <mu^n_s, sigma^2 psi_delta> ds; with pure=True the factor gamma
    is dropped on both sides (the raw local-time identity).
    """
    rhs = out.flux_rhs_pure if pure else out.flux_rhs
    lhs = out.mean_local_time if pure else out.kill_integral
    return {d: float(abs(lhs[-1] - series[-1])) for d, series in rhs.items()}


def martingale_rms(outputs) -> float:
    """RMS over seeds of M^n_T."""
    vals = [o.martingale[-1] for o in outputs]
    return float(np.sqrt(np.mean(np.square(vals))))


def martingale_residual(spec, n_list, seeds: int, dt: float, T: float, reflection="euler"):
    """RMS table of |M^n_T| over >= 20 seeds per n, with the fitted log-log slope.

    Returns ({n: rms}, slope, r2); slope is nan when fewer than 3 sizes are given.
    """
    from .particles import simulate

    table = {}
    for i, n in enumerate(n_list):
        outs = [
            simulate(spec, n=n, dt=dt, T=T, seed=7000 * (i + 1) + s, reflection=reflection)
            for s in range(seeds)
        ]
        table[n] = martingale_rms(outs)
    if len(n_list) >= 3 and all(v > 0 for v in table.values()):
        slope, _, r2 = convergence_fit(list(n_list), [table[n] for n in n_list])
    else:
        slope, r2 = float("nan"), float("nan")
    return table, slope, r2


def convergence_fit(xs, ys):
    """Least squares on (log x, log y): returns (slope, intercept, R^2)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 3 or len(xs) != len(ys):
        raise ValueError("need at least 3 (x, y) pairs")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("log-log fit needs positive inputs")
    lx, ly = np.log(xs), np.log(ys)
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    resid = ly - A @ coef
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return slope, intercept, r2


# ---------------------------------------------------------------------------
# energy norm of survivor-function differences (moving frame)
# ---------------------------------------------------------------------------


def energy_norm_fields(edges_a, w_a, edges_b, w_b) -> float:
    """|| F^Delta ||_2: L2 norm in y of the difference of survivor functions.

    Both fields live in their own moving frame; the union of cell edges is
    used, on which both survivors are piecewise linear, so the square
    integrates exactly by Simpson per panel.
    """
    fa = FieldMarginal(np.asarray(edges_a, float), np.asarray(w_a, float))
    fb = FieldMarginal(np.asarray(edges_b, float), np.asarray(w_b, float))
    xs = np.unique(np.concatenate([fa.edges, fb.edges]))
    lo = min(xs[0], 0.0)
    xs = np.concatenate([[lo - 1.0], xs])  # survivors are constant below the grids
    d_lo = fa.survivor(xs) - fb.survivor(xs)
    mid = 0.5 * (xs[:-1] + xs[1:])
    d_mid = fa.survivor(mid) - fb.survivor(mid)
    h = np.diff(xs)
    sq = (d_lo[:-1] ** 2 + 4.0 * d_mid**2 + d_lo[1:] ** 2) * h / 6.0
    return float(np.sqrt(np.sum(sq)))


def energy_norm_survivors(y, Sa, Sb) -> float:
    """L2 norm of Sa - Sb on a shared grid (piecewise-linear survivors)."""
    y = np.asarray(y, float)
    d = np.asarray(Sa, float) - np.asarray(Sb, float)
    d0, d1 = d[:-1], d[1:]
    h = np.diff(y)
    return float(np.sqrt(np.sum((d0 * d0 + d0 * d1 + d1 * d1) * h / 3.0)))


# ---------------------------------------------------------------------------
# aggregate comparison report
# ---------------------------------------------------------------------------


@dataclass
class SnapshotComparison:
    t: float
    ks: float
    w1: float
    mass_gap: float


@dataclass
class ComparisonReport:
    per_snapshot: list[SnapshotComparison]
    sup_A: float
    sup_I: float
    c_identity_residual: float

    def to_rows(self):
        return [(c.t, c.ks, c.w1, c.mass_gap) for c in self.per_snapshot]


def compare_paths(sim_bundle, ref_bundle) -> tuple[float, float]:
    """sup_t |A^n - A| and sup_t |I^n - I| on the simulation grid."""
    A_ref = np.interp(sim_bundle.t, ref_bundle.t, ref_bundle.A)
    I_ref = np.interp(sim_bundle.t, ref_bundle.t, ref_bundle.I)
    return (
        float(np.max(np.abs(sim_bundle.A - A_ref))),
        float(np.max(np.abs(sim_bundle.I - I_ref))),
    )
