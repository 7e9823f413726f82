"""Monte Carlo engine for the n-particle reflected-killed system.

Euler-Maruyama in the frame of the moving front: for a live particle with
offset Y = X - A_t >= 0 the step is

    Y* = Y + (b(t, X) - A'_t) dt + sigma(t, X) sqrt(dt) xi,

followed by the one-step Skorokhod map Y <- max(Y*, 0) with regulator
increment dk = max(-Y*, 0).  The semimartingale local time under the
half-d-ell convention is twice the push, d ell = 2 dk.  The hazard
Lambda = int gamma(s, C_s) d ell_s runs against a unit exponential clock chi;
a particle is killed in the step when Lambda + dLambda >= chi, with the kill
time placed by linear interpolation of Lambda inside the step (ties kill).

Within a step the macroscopic state (A, A', C) is frozen at its start-of-step
value; realized kills are added to I^n at the step's end node and the front is
refreshed from the exact step-function kernel convolution before the next step.

Randomness comes from counter-based Philox streams keyed by the seed with the
step index and a purpose word in the counter, drawn once per step in fixed
particle order, so results are bit-identical regardless of how a sweep is
scheduled.  The optional "bridge" reflection replaces the naive one-step map
(which biases the local time by O(sqrt(dt))) with exact joint sampling of the
step endpoint and the Brownian-bridge minimum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .paths import PathBundle, StepConvolver
from .scenario import ScenarioSpec

_PURPOSE_NORMAL = 0
_PURPOSE_BRIDGE = 1
_PURPOSE_INIT = 2
_PURPOSE_CLOCK = 3
_KEY_SALT = 0x9E3779B97F4A7C15


def stream(seed: int, step: int, purpose: int) -> np.random.Generator:
    """Philox stream for (seed, step, purpose); particle index = draw position."""
    bg = np.random.Philox(key=np.array([seed, _KEY_SALT], dtype=np.uint64),
                          counter=np.array([0, 0, step, purpose], dtype=np.uint64))
    return np.random.Generator(bg)


@dataclass
class Snapshot:
    """Sorted alive positions at one time; an empirical sub-probability measure."""

    t: float
    positions: np.ndarray  # sorted, physical frame
    n: int

    @property
    def alive_fraction(self) -> float:
        return len(self.positions) / self.n


def empirical_survivor_cdf(snapshot: Snapshot, x) -> np.ndarray | float:
    """(number of alive particles with position > x) / n, by binary search."""
    pos = snapshot.positions
    idx = np.searchsorted(pos, np.asarray(x, dtype=float), side="right")
    out = (len(pos) - idx) / snapshot.n
    return out if out.ndim else float(out)


@dataclass
class SimulationOutput:
    bundle: PathBundle
    snapshots: list[Snapshot]
    tau: np.ndarray                      # kill times, nan for survivors
    alive_count: np.ndarray              # int series on the grid
    killed_count: np.ndarray             # int series on the grid
    kill_integral: np.ndarray            # (1/n) sum_i int 1_{s<tau} gamma dell
    mean_local_time: np.ndarray          # (1/n) sum_i ell_{t and tau}
    flux_rhs: dict                       # delta -> cumulative mollified series
    flux_rhs_pure: dict                  # same with gamma replaced by 1
    final_ell: np.ndarray
    final_hazard: np.ndarray
    n: int
    seed: int
    dt: float
    reflection: str

    @property
    def martingale(self) -> np.ndarray:
        """M^n_t = I^n_t - (1/n) sum_i int_0^t 1_{s<tau} gamma(s, C^n_s) d ell^i_s."""
        return self.bundle.I - self.kill_integral

    def conservation_defect(self) -> int:
        """max_k |n - alive_k - killed_k|; zero means the identity is exact."""
        return int(np.max(np.abs(self.n - self.alive_count - self.killed_count)))

    def snapshot_at(self, t: float) -> Snapshot:
        for s in self.snapshots:
            if abs(s.t - t) <= 1e-9:
                return s
        raise KeyError(f"no snapshot at t={t}")


def _bridge_minimum(y0, y1, var, u):
    """Minimum of a Brownian bridge from y0 to y1 with variance var, via inverse CDF."""
    d = y1 - y0
    return 0.5 * (y0 + y1 - np.sqrt(d * d - 2.0 * var * np.log(u)))


def simulate(
    spec: ScenarioSpec,
    n: int,
    dt: float,
    T: float | None = None,
    seed: int = 0,
    snapshot_times=(),
    reflection: str = "euler",
    flux_deltas=(),
    exogenous: PathBundle | None = None,
    stream_perm: np.ndarray | None = None,
) -> SimulationOutput:
    """Time-march the n-particle system; deterministic for a fixed seed.

    snapshot_times must sit on the time grid.  flux_deltas enables the
    mollified boundary-flux diagnostic (one cumulative series per delta).
    When ``exogenous`` is given, (A, C, A') are read from that bundle instead
    of being fed back from realized kills (the decoupled construction).
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if T is None:
        T = spec.horizon
    if not (0.0 < dt <= spec.dbar):
        raise ValueError("need 0 < dt <= dbar")
    K = int(round(T / dt))
    if abs(K * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("dt must divide T")
    snap_idx = {}
    for ts in snapshot_times:
        ks = int(round(ts / dt))
        if abs(ks * dt - ts) > 1e-9 or not (0 <= ks <= K):
            raise ValueError(f"snapshot time {ts} not on the grid")
        snap_idx[ks] = float(ts)
    if reflection not in ("euler", "bridge"):
        raise ValueError("reflection must be 'euler' or 'bridge'")
    flux_deltas = tuple(float(d) for d in flux_deltas)

    def maybe_perm(a):
        return a if stream_perm is None else a[stream_perm]

    x0 = maybe_perm(spec.initial.sample(n, spec.a0, stream(seed, 0, _PURPOSE_INIT)))
    chi = maybe_perm(stream(seed, 0, _PURPOSE_CLOCK).exponential(1.0, n))

    Y = x0 - spec.a0  # offsets from the front (A_0 = a0)
    if np.any(Y < 0):
        raise ValueError("initial positions must lie at or above a0")
    alive = np.ones(n, dtype=bool)
    ell = np.zeros(n)
    hazard = np.zeros(n)
    tau = np.full(n, np.nan)

    tgrid = dt * np.arange(K + 1)
    I = np.zeros(K + 1)
    A = np.zeros(K + 1)
    C = np.zeros(K + 1)
    Ap = np.zeros(K + 1)
    alive_count = np.zeros(K + 1, dtype=np.int64)
    killed_count = np.zeros(K + 1, dtype=np.int64)
    kill_int = np.zeros(K + 1)
    mean_ell = np.zeros(K + 1)
    flux_rhs = {d: np.zeros(K + 1) for d in flux_deltas}
    flux_rhs_pure = {d: np.zeros(K + 1) for d in flux_deltas}
    snapshots = []

    conv = StepConvolver(spec.kernel, dt)
    ker = spec.kernel
    seg_slopes = ker.slopes()
    seg_breaks = ker.breaks
    jumps = ker.jumps()
    sqdt = np.sqrt(dt)
    n_killed = 0
    delta_clip = {d: 7.0 * np.sqrt(d) for d in flux_deltas}
    Jcum = np.zeros(K + 2)  # running integral of the step history, maintained below

    if exogenous is not None:
        A_exo = np.interp(tgrid, exogenous.t, exogenous.A)
        C_exo = np.interp(tgrid, exogenous.t, exogenous.C)
        Ap_exo = np.interp(tgrid, exogenous.t, exogenous.Aprime)

    def step_value(k, s):
        if s < 0.0:
            return 0.0
        m = min(int(np.floor(s / dt + 1e-12)), k)
        return I[m]

    def running_integral(k, s):
        if s <= 0.0:
            return 0.0
        m = min(int(np.floor(s / dt + 1e-12)), k)
        return Jcum[m] + I[m] * (s - m * dt)

    def macro_state(k):
        if exogenous is not None:
            return float(A_exo[k]), float(C_exo[k]), float(Ap_exo[k])
        a = conv.front(I, k, spec.a0, spec.alpha)
        c = conv.contagiousness(I, k)
        # BV front velocity: alpha [rho(0) I_t + int I(t-s) d(rho)(s)]
        t = tgrid[k]
        v = ker.rho0 * I[k]
        for i in range(len(seg_slopes)):
            if seg_slopes[i] == 0.0:
                continue
            v += seg_slopes[i] * (
                running_integral(k, t - seg_breaks[i]) - running_integral(k, t - seg_breaks[i + 1])
            )
        for s_j, jump in jumps:
            v += jump * step_value(k, t - s_j)
        return a, c, spec.alpha * v

    for k in range(K + 1):
        A[k], C[k], Ap[k] = macro_state(k)
        alive_count[k] = int(np.sum(alive))
        killed_count[k] = n_killed
        if k in snap_idx:
            snapshots.append(Snapshot(snap_idx[k], np.sort(Y[alive]) + A[k], n))
        if k == K:
            break

        t = tgrid[k]
        idx = np.nonzero(alive)[0]
        Xa = Y[idx] + A[k]
        sig = np.asarray(spec.sigma(t, Xa), dtype=float)
        drift = (np.asarray(spec.b(t, Xa), dtype=float) - Ap[k]) * dt
        gam = float(spec.gamma(t, C[k]))

        if flux_deltas:
            sig2 = sig * sig
            Ya = Y[idx]
            for d in flux_deltas:
                near = Ya < delta_clip[d]
                if np.any(near):
                    psi = 2.0 * np.exp(-0.5 * Ya[near] ** 2 / d) / np.sqrt(2.0 * np.pi * d)
                    val = dt * float(np.sum(sig2[near] * psi)) / n
                else:
                    val = 0.0
                flux_rhs_pure[d][k + 1] = flux_rhs_pure[d][k] + val
                flux_rhs[d][k + 1] = flux_rhs[d][k] + gam * val

        xi = maybe_perm(stream(seed, k, _PURPOSE_NORMAL).standard_normal(n))[idx]
        free = Y[idx] + drift + sig * sqdt * xi
        if reflection == "euler":
            push = np.maximum(-free, 0.0)
            Ynew = np.maximum(free, 0.0)
        else:
            u = 1.0 - maybe_perm(stream(seed, k, _PURPOSE_BRIDGE).random(n))[idx]
            bmin = _bridge_minimum(Y[idx], free, sig * sig * dt, u)
            push = np.maximum(-bmin, 0.0)
            Ynew = free + push
        dell = 2.0 * push
        dlam = gam * dell

        lam0 = hazard[idx]
        room = chi[idx] - lam0
        killed = dlam >= room
        surv = ~killed
        # hazard actually accrued inside the step: min(dlam, chi - Lambda)
        kill_int[k + 1] = kill_int[k] + float(np.sum(np.minimum(dlam, room))) / n
        theta = np.ones_like(dell)
        if np.any(killed):
            theta[killed] = room[killed] / dlam[killed]
            kidx = idx[killed]
            tau[kidx] = t + dt * theta[killed]
            alive[kidx] = False
            n_killed += int(np.sum(killed))
        mean_ell[k + 1] = mean_ell[k] + float(np.sum(dell * theta)) / n

        Y[idx[surv]] = Ynew[surv]
        ell[idx] += dell * theta
        hazard[idx] = np.minimum(lam0 + dlam, chi[idx])
        I[k + 1] = n_killed / n
        Jcum[k + 1] = Jcum[k] + I[k] * dt

    bundle = PathBundle(tgrid, I, A, C, Ap)
    return SimulationOutput(
        bundle=bundle,
        snapshots=snapshots,
        tau=tau,
        alive_count=alive_count,
        killed_count=killed_count,
        kill_integral=kill_int,
        mean_local_time=mean_ell,
        flux_rhs=flux_rhs,
        flux_rhs_pure=flux_rhs_pure,
        final_ell=ell,
        final_hazard=hazard,
        n=n,
        seed=seed,
        dt=dt,
        reflection=reflection,
    )
