"""Macroscopic path bookkeeping shared by all engines.

The front A, current contagiousness C, and front velocity A' are kernel
functionals of the infected-proportion history I.  Histories live on a uniform
grid and are interpreted either as right-continuous step functions (particle
engine: jumps of size 1/n at grid nodes) or as piecewise-linear interpolants
(PDE engine).  All convolutions are computed exactly per panel: the kernel is
piecewise linear, the history is polynomial per panel, so every panel integral
is a closed-form polynomial integral split at the kernel's breakpoints.  In
particular the identity C_t = (A_t - A_{t-dbar}) / alpha holds to roundoff.

Convention: I_s = 0 for s below the start of the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .families import Kernel
from .scenario import ScenarioSpec


@dataclass
class PathBundle:
    """Macroscopic state series on a uniform grid: t, I, A, C, A'."""

    t: np.ndarray
    I: np.ndarray
    A: np.ndarray
    C: np.ndarray
    Aprime: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def __len__(self) -> int:
        return len(self.t)

    def to_table(self) -> str:
        lines = ["t,I,A,C,Aprime"]
        cols = (self.t, self.I, self.A, self.C, self.Aprime)
        for k in range(len(self.t)):
            lines.append(",".join(repr(float(c[k])) for c in cols))
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_table(text: str) -> "PathBundle":
        rows = text.strip().splitlines()
        if rows[0].strip() != "t,I,A,C,Aprime":
            raise ValueError("not a PathBundle table")
        data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
        return PathBundle(data[:, 0], data[:, 1], data[:, 2], data[:, 3], data[:, 4])


# ---------------------------------------------------------------------------
# single-evaluation operations (reference implementations)
# ---------------------------------------------------------------------------


def _history_value(I: np.ndarray, dt: float, s: float, kind: str) -> float:
    """I(s) under the chosen interpolation, with I = 0 before the grid."""
    if s < 0.0:
        return 0.0
    last = (len(I) - 1) * dt
    if s >= last:
        return float(I[-1])
    if kind == "step":
        return float(I[int(np.floor(s / dt + 1e-12))])
    j = int(np.floor(s / dt))
    j = min(j, len(I) - 2)
    frac = s / dt - j
    return float(I[j] * (1.0 - frac) + I[j + 1] * frac)


def _history_running_integral(I: np.ndarray, dt: float, s: float, kind: str) -> float:
    """J(s) = int_0^s I, exact for the chosen interpolation."""
    if s <= 0.0:
        return 0.0
    n_full = min(int(np.floor(s / dt + 1e-12)), len(I) - 1)
    if kind == "step":
        total = float(np.sum(I[:n_full])) * dt
        total += float(I[min(n_full, len(I) - 1)]) * (s - n_full * dt)
        return total
    mids = 0.5 * (I[:-1] + I[1:])
    total = float(np.sum(mids[:n_full])) * dt
    rem = s - n_full * dt
    if rem > 0.0:
        a = _history_value(I, dt, n_full * dt, kind)
        b = _history_value(I, dt, s, kind)
        total += 0.5 * (a + b) * rem
    return total


def _convolve_at(I: np.ndarray, dt: float, kernel: Kernel, t: float, kind: str) -> float:
    """Exact int_0^dbar rho(u) I(t-u) du with panel-wise closed forms.

    Beyond the last grid node the history continues at its final value.
    """
    total = 0.0
    k = len(I) - 1
    m_lo = max(0, int(np.floor((t - kernel.duration) / dt)) - 1)
    if kind == "step":
        # I(t-u) is constant on u-panels (t - t_{m+1}, t - t_m]
        for m in range(m_lo, k + 1):
            if m == k:
                lo, hi = 0.0, t - k * dt
            else:
                lo, hi = t - (m + 1) * dt, t - m * dt
            lo = max(lo, 0.0)
            hi = min(hi, kernel.duration)
            if hi <= lo or I[m] == 0.0:
                continue
            total += I[m] * (kernel.cumulative(hi) - kernel.cumulative(lo))
        return total
    # piecewise linear: on u in [t - t_{m+1}, t - t_m], I(t-u) is linear in u
    for m in range(m_lo, k):
        lo = t - (m + 1) * dt
        hi = t - m * dt
        if hi <= 0.0 or lo >= kernel.duration:
            continue
        slope = (I[m + 1] - I[m]) / dt
        # I(t-u) = I[m] + slope*(t - u - m dt) = (I[m] + slope*(t - m dt)) - slope*u
        c0 = I[m] + slope * (t - m * dt)
        total += kernel.integral_against_linear(max(lo, 0.0), hi, c0, -slope)
    if t > k * dt:  # constant continuation past the grid end
        total += I[-1] * (
            kernel.cumulative(min(t - k * dt, kernel.duration)) - kernel.cumulative(0.0)
        )
    return total


def advance_front(
    I: np.ndarray, dt: float, spec: ScenarioSpec, t: float, kind: str = "step"
) -> float:
    """A_t = a0 + alpha int rho(t-s) I_s ds, exact on the grid history."""
    return spec.a0 + spec.alpha * _convolve_at(np.asarray(I, float), dt, spec.kernel, t, kind)


def current_contagiousness(
    I: np.ndarray, dt: float, spec: ScenarioSpec, t: float, kind: str = "step"
) -> float:
    """C_t = int rho(t-s)(I_s - I_{s-dbar}) ds = (A_t - A_{t-dbar}) / alpha.

    The second term is the front convolution evaluated at t - dbar, so the
    identity is exact by construction here; engines compute C the same way.
    """
    I = np.asarray(I, float)
    ker = spec.kernel
    return _convolve_at(I, dt, ker, t, kind) - _convolve_at(I, dt, ker, t - ker.duration, kind)


def front_velocity(
    I: np.ndarray,
    dt: float,
    spec: ScenarioSpec,
    t: float,
    kind: str = "step",
    Iprime: np.ndarray | None = None,
) -> float:
    """A'_t for a BV kernel.

    Default: the bounded-variation formula
        A'_t = alpha [ rho(0) I_t - rho(dbar) I_{t-dbar} + int_0^dbar I_{t-s} d(rho)(s) ],
    with rho right-continuous (so rho(dbar) = 0 and the kernel's terminal drop
    is a jump of d(rho)).  When an I'-history is supplied, the equivalent
    convolution form A'_t = alpha int_0^{min(t,dbar)} rho(u) I'_{t-u} du is used
    instead (piecewise-linear I').
    """
    I = np.asarray(I, float)
    ker = spec.kernel
    if Iprime is not None:
        return spec.alpha * _convolve_at(np.asarray(Iprime, float), dt, ker, t, "linear")
    total = ker.rho0 * _history_value(I, dt, t, kind)
    # absolutely continuous part of d(rho): slopes per segment
    slopes = ker.slopes()
    for i in range(len(slopes)):
        if slopes[i] == 0.0:
            continue
        lo, hi = float(ker.breaks[i]), float(ker.breaks[i + 1])
        seg = _history_running_integral(I, dt, t - lo, kind) - _history_running_integral(
            I, dt, t - hi, kind
        )
        total += slopes[i] * seg
    for s_j, jump in ker.jumps():
        total += jump * _history_value(I, dt, t - s_j, kind)
    return spec.alpha * total


# ---------------------------------------------------------------------------
# precomputed-weight forms used inside the engines (same math, O(M) per step)
# ---------------------------------------------------------------------------


@dataclass
class StepConvolver:
    """Exact kernel convolutions against a step-function history on the grid.

    For lag j >= 1 (panel u in ((j-1) dt, j dt]) the history value is I[k-j],
    so A_t is a discrete convolution with weights w_j = R(j dt) - R((j-1) dt).
    The contagiousness subtracts the same convolution with the kernel shifted
    by dbar.
    """

    kernel: Kernel
    dt: float
    w: np.ndarray = field(init=False)
    w_shift: np.ndarray = field(init=False)

    def __post_init__(self):
        d = self.kernel.duration
        m_max = int(np.ceil(2.0 * d / self.dt)) + 2
        edges = self.dt * np.arange(m_max + 1)
        R = np.atleast_1d(self.kernel.cumulative(edges))
        Rs = np.atleast_1d(self.kernel.cumulative(edges - d))
        self.w = np.diff(R)
        self.w_shift = np.diff(Rs)

    def _dot(self, weights: np.ndarray, I: np.ndarray, k: int) -> float:
        jmax = min(k, len(weights))
        if jmax <= 0:
            return 0.0
        # sum_j weights[j-1] * I[k-j]
        return float(np.dot(weights[:jmax], I[k - 1 :: -1][:jmax]))

    def front(self, I: np.ndarray, k: int, a0: float, alpha: float) -> float:
        return a0 + alpha * self._dot(self.w, I, k)

    def contagiousness(self, I: np.ndarray, k: int) -> float:
        return self._dot(self.w, I, k) - self._dot(self.w_shift, I, k)


@dataclass
class LinearConvolver:
    """Exact kernel convolutions against a piecewise-linear history.

    Panel j (u in [(j-1) dt, j dt]) sees the history run linearly from
    I[k-j+1] down to I[k-j]; with P_j = int_panel rho and
    Q_j = (1/dt) int_panel rho(u) (j dt - u) du the convolution is
    sum_j I[k-j] (P_j - Q_j) + I[k-j+1] Q_j.
    """

    kernel: Kernel
    dt: float
    P: np.ndarray = field(init=False)
    Q: np.ndarray = field(init=False)
    Ps: np.ndarray = field(init=False)
    Qs: np.ndarray = field(init=False)

    def __post_init__(self):
        self.P, self.Q = self._weights(shift=0.0)
        self.Ps, self.Qs = self._weights(shift=self.kernel.duration)

    def _weights(self, shift: float):
        d = self.kernel.duration
        m_max = int(np.ceil((d + shift) / self.dt)) + 1
        P = np.zeros(m_max)
        Q = np.zeros(m_max)
        ker = self.kernel
        for j in range(1, m_max + 1):
            lo, hi = (j - 1) * self.dt, j * self.dt
            # integrals of rho(u - shift) over the panel
            a, b = lo - shift, hi - shift
            P[j - 1] = ker.integral_against_linear(a, b, 1.0, 0.0)
            # (1/dt) int rho(u-shift) (j dt - u) du  with u = v + shift
            Q[j - 1] = ker.integral_against_linear(
                a, b, (j * self.dt - shift) / self.dt, -1.0 / self.dt
            )
        return P, Q

    def _conv(self, P, Q, f: np.ndarray, k: int) -> float:
        jmax = min(k, len(P))
        if jmax <= 0:
            return 0.0
        rev = f[k::-1]  # rev[j] = f[k-j]
        lo_vals = rev[1 : jmax + 1]
        hi_vals = rev[:jmax]
        return float(np.dot(P[:jmax] - Q[:jmax], lo_vals) + np.dot(Q[:jmax], hi_vals))

    def front(self, I: np.ndarray, k: int, a0: float, alpha: float) -> float:
        return a0 + alpha * self._conv(self.P, self.Q, I, k)

    def contagiousness(self, I: np.ndarray, k: int) -> float:
        return self._conv(self.P, self.Q, I, k) - self._conv(self.Ps, self.Qs, I, k)

    def velocity_from_rate(self, Iprime: np.ndarray, k: int, alpha: float) -> float:
        return alpha * self._conv(self.P, self.Q, Iprime, k)


def identity_residual(bundle: PathBundle, spec: ScenarioSpec) -> float:
    """max_t |C_t - (A_t - A_{t-dbar})/alpha|; the audit of the Eq-(1.3)-type identity."""
    if spec.alpha == 0.0:
        return float(np.max(np.abs(bundle.C)))
    t = bundle.t
    dt = bundle.dt
    A_shift = np.interp(t - spec.dbar, t, bundle.A, left=spec.a0)
    # the interpolation of A below the grid start is exact (A = a0 there)
    return float(np.max(np.abs(bundle.C - (bundle.A - A_shift) / spec.alpha)))
