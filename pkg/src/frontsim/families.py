"""Coefficient families, the infection-to-recovery kernel, and initial laws.

Everything here is a small parametric family rather than an arbitrary callback,
so that a scenario is fully described by a config file and the standing
regularity conditions (Lipschitz drift with linear growth, non-degenerate
bounded diffusion, reactivity bounded away from zero, normalized BV kernel)
can be checked numerically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, ndtr, ndtri

KERNEL_MASS_TOL = 1e-12


def _logistic(x):
    return expit(x)


@dataclass(frozen=True)
class CoefficientFamily:
    """One of the named coefficient families, with optional time modulation.

    kinds:
      constant   params = [c]
      affine     params = [c0, c1]                    (drift only)
      sigmoid    params = [s0, s1]                    sigma = s0 + s1*logistic(x)
      logistic   params = [g0, g1, k, cstar]          gamma = g0 + g1*logistic(k*(c-cstar))

    The modulation multiplies the base value by m(t) = 1 + eps*sin(omega*t),
    |eps| < 1, so bounds and signs survive.
    """

    kind: str
    params: tuple[float, ...]
    mod_eps: float = 0.0
    mod_omega: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        n_expected = {"constant": 1, "affine": 2, "sigmoid": 2, "logistic": 4}
        if self.kind not in n_expected:
            raise ValueError(f"unknown coefficient family kind {self.kind!r}")
        if len(self.params) != n_expected[self.kind]:
            raise ValueError(
                f"{self.kind} family takes {n_expected[self.kind]} params, got {len(self.params)}"
            )
        if abs(self.mod_eps) >= 1.0:
            raise ValueError("time modulation requires |eps| < 1")

    # -- evaluation ---------------------------------------------------------

    def _modulation(self, t):
        if self.mod_eps == 0.0:
            return 1.0 if np.isscalar(t) else np.ones_like(np.asarray(t, dtype=float))
        return 1.0 + self.mod_eps * np.sin(self.mod_omega * np.asarray(t, dtype=float))

    def _base(self, x):
        p = self.params
        if self.kind == "constant":
            return p[0] if np.isscalar(x) else np.full_like(np.asarray(x, dtype=float), p[0])
        if self.kind == "affine":
            return p[0] + p[1] * np.asarray(x, dtype=float) if not np.isscalar(x) else p[0] + p[1] * x
        if self.kind == "sigmoid":
            return p[0] + p[1] * _logistic(np.asarray(x, dtype=float))
        if self.kind == "logistic":
            g0, g1, k, cstar = p
            return g0 + g1 * _logistic(k * (np.asarray(x, dtype=float) - cstar))
        raise AssertionError(self.kind)

    def __call__(self, t, x):
        return self._base(x) * self._modulation(t)

    @property
    def time_dependent(self) -> bool:
        return self.mod_eps != 0.0

    @property
    def space_constant(self) -> bool:
        return self.kind == "constant"

    # -- declared regularity constants --------------------------------------

    def declared_lipschitz(self) -> float:
        """Analytic Lipschitz constant in x, uniform over t."""
        m = 1.0 + abs(self.mod_eps)
        p = self.params
        if self.kind == "constant":
            return 0.0
        if self.kind == "affine":
            return abs(p[1]) * m
        if self.kind == "sigmoid":
            return abs(p[1]) * 0.25 * m
        if self.kind == "logistic":
            return abs(p[1] * p[2]) * 0.25 * m
        raise AssertionError(self.kind)

    def declared_growth(self) -> float:
        """kappa with |f(t,x)| <= kappa*(1+|x|) for all t, x."""
        m = 1.0 + abs(self.mod_eps)
        p = self.params
        if self.kind == "constant":
            return abs(p[0]) * m
        if self.kind == "affine":
            return max(abs(p[0]), abs(p[1])) * m
        if self.kind == "sigmoid":
            return (abs(p[0]) + abs(p[1])) * m
        if self.kind == "logistic":
            return (abs(p[0]) + abs(p[1])) * m
        raise AssertionError(self.kind)

    def declared_range(self) -> tuple[float, float]:
        """Analytic [min, max] over all t and x (logistic family: over its argument)."""
        lo_m = 1.0 - abs(self.mod_eps)
        hi_m = 1.0 + abs(self.mod_eps)
        p = self.params
        if self.kind == "constant":
            base_lo = base_hi = p[0]
        elif self.kind == "sigmoid":
            base_lo, base_hi = p[0], p[0] + p[1]
        elif self.kind == "logistic":
            base_lo, base_hi = p[0], p[0] + p[1]
        else:
            return (-np.inf, np.inf)
        if base_lo < 0:
            return (base_lo * hi_m, base_hi * hi_m)
        return (base_lo * lo_m, base_hi * hi_m)


# ---------------------------------------------------------------------------
# infection-to-recovery kernel
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Kernel:
    """Normalized piecewise-linear kernel on [0, duration], right-continuous.

    Segment i covers [breaks[i], breaks[i+1]) with values running linearly
    from ``left[i]`` to ``right_lim[i]`` (the limit from the left at the
    segment end).  rho vanishes outside [0, duration); right-continuity forces
    rho(duration) = 0, and any positive left limit there appears as a terminal
    jump in the Stieltjes measure d(rho).
    """

    kind: str
    duration: float
    breaks: np.ndarray
    left: np.ndarray
    right_lim: np.ndarray
    raw_nodes: tuple = ()

    def __eq__(self, other):
        if not isinstance(other, Kernel):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.duration == other.duration
            and np.array_equal(self.breaks, other.breaks)
            and np.array_equal(self.left, other.left)
            and np.array_equal(self.right_lim, other.right_lim)
        )

    # -- constructors --------------------------------------------------------

    @staticmethod
    def constant(duration: float) -> "Kernel":
        _check_duration(duration)
        h = 1.0 / duration
        return Kernel(
            "constant",
            duration,
            np.array([0.0, duration]),
            np.array([h]),
            np.array([h]),
        )

    @staticmethod
    def triangular(duration: float) -> "Kernel":
        _check_duration(duration)
        h = 2.0 / duration  # peak height after normalization
        return Kernel(
            "triangular",
            duration,
            np.array([0.0, duration / 2.0, duration]),
            np.array([0.0, h]),
            np.array([h, 0.0]),
        )

    @staticmethod
    def piecewise_linear(duration: float, nodes) -> "Kernel":
        """nodes: sequence of (s, value); a repeated s encodes a jump.

        Values are linearly interpolated between distinct node abscissae and
        normalized to unit mass at construction.
        """
        _check_duration(duration)
        nodes = [(float(s), float(v)) for s, v in nodes]
        if len(nodes) < 2:
            raise ValueError("piecewise-linear kernel needs at least two nodes")
        ss = [s for s, _ in nodes]
        if any(b < a for a, b in zip(ss, ss[1:])):
            raise ValueError("kernel nodes must be sorted by abscissa")
        if ss[0] != 0.0 or ss[-1] != duration:
            raise ValueError("kernel nodes must span [0, duration]")
        if any(v < 0 for _, v in nodes):
            raise ValueError("kernel values must be nonnegative")
        breaks, left, right_lim = [], [], []
        i = 0
        while i < len(nodes) - 1:
            s0, v0 = nodes[i]
            s1, v1 = nodes[i + 1]
            if s1 == s0:  # jump marker; the later value wins as the segment start
                i += 1
                continue
            breaks.append(s0)
            left.append(v0)
            right_lim.append(v1)
            i += 1
        breaks.append(duration)
        if not left:
            raise ValueError("kernel has no segments of positive length")
        k = Kernel(
            "piecewise-linear",
            duration,
            np.asarray(breaks, dtype=float),
            np.asarray(left, dtype=float),
            np.asarray(right_lim, dtype=float),
            raw_nodes=tuple(nodes),
        )
        mass = k._raw_mass()
        if mass <= 0.0:
            raise ValueError("kernel mass must be positive")
        return Kernel(
            k.kind, k.duration, k.breaks, k.left / mass, k.right_lim / mass, k.raw_nodes
        )

    @staticmethod
    def make(kind: str, duration: float, nodes=None) -> "Kernel":
        if kind == "constant":
            return Kernel.constant(duration)
        if kind == "triangular":
            return Kernel.triangular(duration)
        if kind == "piecewise-linear":
            if nodes is None:
                raise ValueError("piecewise-linear kernel requires nodes")
            return Kernel.piecewise_linear(duration, nodes)
        raise ValueError(f"unknown kernel kind {kind!r}")

    # -- basic queries --------------------------------------------------------

    def _raw_mass(self) -> float:
        seg = np.diff(self.breaks)
        return float(np.sum(0.5 * (self.left + self.right_lim) * seg))

    def mass(self) -> float:
        return self._raw_mass()

    def rho(self, u):
        """Right-continuous evaluation; zero outside [0, duration)."""
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        inside = (u >= 0.0) & (u < self.duration)
        if np.any(inside):
            ui = u[inside]
            idx = np.clip(np.searchsorted(self.breaks, ui, side="right") - 1, 0, len(self.left) - 1)
            s0 = self.breaks[idx]
            s1 = self.breaks[idx + 1]
            frac = (ui - s0) / (s1 - s0)
            out[inside] = self.left[idx] + frac * (self.right_lim[idx] - self.left[idx])
        return out if out.ndim else float(out)

    @property
    def rho0(self) -> float:
        """rho(0), the right-continuous value at the origin."""
        return float(self.left[0])

    def slopes(self) -> np.ndarray:
        return (self.right_lim - self.left) / np.diff(self.breaks)

    def jumps(self) -> list[tuple[float, float]]:
        """Atoms of d(rho) on (0, duration], including the terminal drop to zero."""
        out = []
        for i in range(1, len(self.left)):
            d = float(self.left[i] - self.right_lim[i - 1])
            if d != 0.0:
                out.append((float(self.breaks[i]), d))
        if self.right_lim[-1] != 0.0:
            out.append((self.duration, -float(self.right_lim[-1])))
        return out

    # -- exact integrals ------------------------------------------------------

    def cumulative(self, u):
        """R(u) = int_0^u rho, clamped to [0, 1]; exact."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        uc = np.clip(u, 0.0, self.duration)
        seg_mass = 0.5 * (self.left + self.right_lim) * np.diff(self.breaks)
        cum = np.concatenate(([0.0], np.cumsum(seg_mass)))
        idx = np.clip(np.searchsorted(self.breaks, uc, side="right") - 1, 0, len(self.left) - 1)
        s0 = self.breaks[idx]
        ds = uc - s0
        slope = self.slopes()[idx]
        partial = self.left[idx] * ds + 0.5 * slope * ds * ds
        out = cum[idx] + partial
        out[u >= self.duration] = cum[-1]
        out[u <= 0.0] = 0.0
        return out if out.shape != (1,) else float(out[0])

    def integral_against_linear(self, a: float, b: float, c0: float, c1: float) -> float:
        """Exact int_a^b rho(u) (c0 + c1 u) du, with [a,b] clipped to the support."""
        a = max(a, 0.0)
        b = min(b, self.duration)
        if b <= a:
            return 0.0
        total = 0.0
        for i in range(len(self.left)):
            lo = max(a, float(self.breaks[i]))
            hi = min(b, float(self.breaks[i + 1]))
            if hi <= lo:
                continue
            s0 = float(self.breaks[i])
            v0 = float(self.left[i])
            m = float(self.slopes()[i])
            # rho(u) = v0 + m (u - s0);  integrand is quadratic in u
            p0 = v0 - m * s0
            # (p0 + m u)(c0 + c1 u) = p0 c0 + (p0 c1 + m c0) u + m c1 u^2
            A = p0 * c0
            B = p0 * c1 + m * c0
            C = m * c1
            total += (
                A * (hi - lo)
                + B * 0.5 * (hi * hi - lo * lo)
                + C * (hi**3 - lo**3) / 3.0
            )
        return total


def _check_duration(duration):
    if not (duration > 0.0):
        raise ValueError("kernel duration must be positive")


# ---------------------------------------------------------------------------
# initial distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InitialDistribution:
    """Initial law P0 supported on [a0, inf).

    kinds:
      point-mass           params = [x0]
      truncated-gaussian   params = [mean, std]   (truncated below at a0)
      shifted-exponential  params = [rate]        (a0 + Exp(rate); heavy-tail caveat)
    """

    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        n_expected = {"point-mass": 1, "truncated-gaussian": 2, "shifted-exponential": 1}
        if self.kind not in n_expected:
            raise ValueError(f"unknown initial distribution kind {self.kind!r}")
        if len(self.params) != n_expected[self.kind]:
            raise ValueError(
                f"{self.kind} takes {n_expected[self.kind]} params, got {len(self.params)}"
            )
        if self.kind == "truncated-gaussian" and self.params[1] <= 0:
            raise ValueError("truncated-gaussian std must be positive")
        if self.kind == "shifted-exponential" and self.params[0] <= 0:
            raise ValueError("shifted-exponential rate must be positive")

    @property
    def sub_gaussian(self) -> bool:
        return self.kind != "shifted-exponential"

    def check_support(self, a0: float):
        if self.kind == "point-mass" and self.params[0] < a0:
            raise ValueError("point mass must sit at or above a0")

    def sample(self, n: int, a0: float, rng: np.random.Generator) -> np.ndarray:
        """n i.i.d. draws, all >= a0, deterministic given the generator state."""
        if n < 1:
            raise ValueError("need n >= 1")
        if self.kind == "point-mass":
            return np.full(n, self.params[0], dtype=float)
        u = rng.random(n)
        return self.quantile(u, a0)

    def quantile(self, u, a0: float):
        """Inverse CDF; u in (0,1)."""
        u = np.asarray(u, dtype=float)
        if self.kind == "point-mass":
            return np.full_like(u, self.params[0])
        if self.kind == "truncated-gaussian":
            m, s = self.params
            lo = ndtr((a0 - m) / s)
            return m + s * ndtri(lo + u * (1.0 - lo))
        if self.kind == "shifted-exponential":
            rate = self.params[0]
            return a0 - np.log1p(-u) / rate
        raise AssertionError(self.kind)

    def mean(self, a0: float) -> float:
        if self.kind == "point-mass":
            return self.params[0]
        if self.kind == "truncated-gaussian":
            m, s = self.params
            alpha = (a0 - m) / s
            # hazard of the standard normal at the truncation point
            phi = np.exp(-0.5 * alpha * alpha) / np.sqrt(2.0 * np.pi)
            return m + s * phi / ndtr(-alpha)
        if self.kind == "shifted-exponential":
            return a0 + 1.0 / self.params[0]
        raise AssertionError(self.kind)

    def density(self, x, a0: float):
        """Density on [a0, inf); zero below; point masses raise."""
        if self.kind == "point-mass":
            raise ValueError("point mass has no density")
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        ok = x >= a0
        if self.kind == "truncated-gaussian":
            m, s = self.params
            z = (x[ok] - m) / s
            norm = ndtr(-(a0 - m) / s)
            out[ok] = np.exp(-0.5 * z * z) / (s * np.sqrt(2.0 * np.pi) * norm)
        else:
            rate = self.params[0]
            out[ok] = rate * np.exp(-rate * (x[ok] - a0))
        return out
