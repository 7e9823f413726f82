"""Scenario description, TOML round-trip, and assumption validation."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import tomli

from .families import CoefficientFamily, InitialDistribution, Kernel, KERNEL_MASS_TOL

_ROLE_KINDS = {
    "drift": ("constant", "affine"),
    "diffusion": ("constant", "sigmoid"),
    "reactivity": ("constant", "logistic"),
}


@dataclass(frozen=True)
class ScenarioSpec:
    drift: CoefficientFamily
    diffusion: CoefficientFamily
    reactivity: CoefficientFamily
    kernel: Kernel
    alpha: float
    a0: float
    horizon: float
    initial: InitialDistribution

    def __post_init__(self):
        if not (self.alpha >= 0.0):
            raise ValueError("alpha must be nonnegative")
        if not (self.horizon > 0.0):
            raise ValueError("horizon must be positive")
        for role, fam in (
            ("drift", self.drift),
            ("diffusion", self.diffusion),
            ("reactivity", self.reactivity),
        ):
            if fam.kind not in _ROLE_KINDS[role]:
                raise ValueError(f"{role} family may not be of kind {fam.kind!r}")
        self.initial.check_support(self.a0)

    # coefficient shorthands used throughout the engines
    def b(self, t, x):
        return self.drift(t, x)

    def sigma(self, t, x):
        return self.diffusion(t, x)

    def gamma(self, t, c):
        return self.reactivity(t, c)

    @property
    def dbar(self) -> float:
        return self.kernel.duration


def eval_coefficients(spec: ScenarioSpec, t, x):
    """(b, sigma, sigma^2) at (t, x); sigma^2 is the square of the returned sigma."""
    s = spec.sigma(t, x)
    return spec.b(t, x), s, s * s


def sample_initial(spec: ScenarioSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    return spec.initial.sample(n, spec.a0, rng)


# ---------------------------------------------------------------------------
# TOML round-trip
# ---------------------------------------------------------------------------

_SECTIONS = ("scenario", "drift", "diffusion", "reactivity", "kernel", "initial")
_KEYS = {
    "scenario": ("alpha", "a0", "horizon"),
    "drift": ("kind", "params", "mod_eps", "mod_omega"),
    "diffusion": ("kind", "params", "mod_eps", "mod_omega"),
    "reactivity": ("kind", "params", "mod_eps", "mod_omega"),
    "kernel": ("kind", "duration", "nodes"),
    "initial": ("kind", "params"),
}


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, int):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v)}")


def dumps_scenario(spec: ScenarioSpec) -> str:
    """Canonical TOML: fixed section and key order, repr floats."""
    doc = {
        "scenario": {"alpha": spec.alpha, "a0": spec.a0, "horizon": spec.horizon},
        "drift": _family_dict(spec.drift),
        "diffusion": _family_dict(spec.diffusion),
        "reactivity": _family_dict(spec.reactivity),
        "kernel": _kernel_dict(spec.kernel),
        "initial": {"kind": spec.initial.kind, "params": list(spec.initial.params)},
    }
    buf = io.StringIO()
    for sec in _SECTIONS:
        buf.write(f"[{sec}]\n")
        for key in _KEYS[sec]:
            if key in doc[sec]:
                buf.write(f"{key} = {_fmt(doc[sec][key])}\n")
        buf.write("\n")
    return buf.getvalue()


def _family_dict(fam: CoefficientFamily) -> dict:
    d = {"kind": fam.kind, "params": list(fam.params)}
    if fam.mod_eps != 0.0:
        d["mod_eps"] = fam.mod_eps
        d["mod_omega"] = fam.mod_omega
    return d


def _kernel_dict(kernel: Kernel) -> dict:
    d = {"kind": kernel.kind, "duration": kernel.duration}
    if kernel.kind == "piecewise-linear":
        d["nodes"] = [[s, v] for s, v in kernel.raw_nodes]
    return d


class ScenarioError(ValueError):
    """Malformed scenario document (unknown keys, bad values, wrong types)."""


def loads_scenario(text: str) -> ScenarioSpec:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ScenarioError(f"invalid TOML: {exc}") from exc
    unknown = set(doc) - set(_SECTIONS)
    if unknown:
        raise ScenarioError(f"unknown sections: {sorted(unknown)}")
    missing = set(_SECTIONS) - set(doc)
    if missing:
        raise ScenarioError(f"missing sections: {sorted(missing)}")
    for sec in _SECTIONS:
        bad = set(doc[sec]) - set(_KEYS[sec])
        if bad:
            raise ScenarioError(f"unknown keys in [{sec}]: {sorted(bad)}")
    try:
        fams = {}
        for role in ("drift", "diffusion", "reactivity"):
            d = doc[role]
            fams[role] = CoefficientFamily(
                kind=d["kind"],
                params=tuple(d["params"]),
                mod_eps=float(d.get("mod_eps", 0.0)),
                mod_omega=float(d.get("mod_omega", 0.0)),
            )
        kd = doc["kernel"]
        kernel = Kernel.make(kd["kind"], float(kd["duration"]), kd.get("nodes"))
        init = InitialDistribution(doc["initial"]["kind"], tuple(doc["initial"]["params"]))
        sc = doc["scenario"]
        return ScenarioSpec(
            drift=fams["drift"],
            diffusion=fams["diffusion"],
            reactivity=fams["reactivity"],
            kernel=kernel,
            alpha=float(sc["alpha"]),
            a0=float(sc["a0"]),
            horizon=float(sc["horizon"]),
            initial=init,
        )
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(str(exc)) from exc


def load_scenario(path) -> ScenarioSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_scenario(fh.read())


def save_scenario(spec: ScenarioSpec, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_scenario(spec))


# ---------------------------------------------------------------------------
# validation against the standing assumptions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Clause:
    name: str
    passed: bool
    value: float
    message: str = ""


@dataclass(frozen=True)
class ValidationReport:
    clauses: tuple[Clause, ...]
    warnings: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.clauses)

    def constant(self, name: str) -> float:
        for c in self.clauses:
            if c.name == name:
                return c.value
        raise KeyError(name)

    def summary(self) -> str:
        lines = [
            f"[{'PASS' if c.passed else 'FAIL'}] {c.name} = {c.value:.6g}"
            + (f"  ({c.message})" if c.message else "")
            for c in self.clauses
        ]
        lines += [f"[WARN] {w}" for w in self.warnings]
        return "\n".join(lines)


def _probe_lipschitz(f, ts, xs) -> float:
    vals = np.array([f(t, xs) for t in ts])
    diffs = np.abs(np.diff(vals, axis=1)) / np.diff(xs)
    return float(diffs.max())


def validate_scenario(spec: ScenarioSpec, n_probe: int = 81) -> ValidationReport:
    """Pass/fail per assumption clause, probed on a deterministic lattice.

    Probes run over t in [0, horizon], x in [a0 - L, a0 + L] with
    L = 25, and the reactivity argument c in [0, 1].
    """
    ts = np.linspace(0.0, spec.horizon, n_probe)
    xs = spec.a0 + np.linspace(-25.0, 25.0, n_probe)
    cs = np.linspace(0.0, 1.0, n_probe)
    clauses = []
    warnings = []

    b_lip = _probe_lipschitz(spec.b, ts, xs)
    b_growth = max(
        float(np.max(np.abs(spec.b(t, xs)) / (1.0 + np.abs(xs)))) for t in ts
    )
    kappa = max(spec.drift.declared_lipschitz(), spec.drift.declared_growth())
    clauses.append(
        Clause("kappa", True, max(b_lip, b_growth), "drift Lipschitz/linear-growth constant")
    )
    clauses.append(
        Clause(
            "drift_within_declared",
            max(b_lip, b_growth) <= kappa * 1.01 + 1e-12,
            kappa,
            "probed constant vs declared",
        )
    )

    sig_vals = np.array([spec.sigma(t, xs) for t in ts])
    sig_min = float(sig_vals.min())
    sig_max = float(sig_vals.max())
    lo, _ = spec.diffusion.declared_range()
    clauses.append(
        Clause("sigma_min", sig_min > 0.0 and lo > 0.0, sig_min, "non-degeneracy")
    )
    clauses.append(Clause("sigma_max", np.isfinite(sig_max), sig_max, "boundedness"))
    clauses.append(
        Clause(
            "sigma_lipschitz",
            True,
            _probe_lipschitz(spec.sigma, ts, xs),
            "probed Lipschitz constant",
        )
    )

    gam_vals = np.array([spec.gamma(t, cs) for t in ts])
    gam_min = float(gam_vals.min())
    gam_max = float(gam_vals.max())
    glo, _ = spec.reactivity.declared_range()
    clauses.append(
        Clause("gamma_min", gam_min > 0.0 and glo > 0.0, gam_min, "bounded away from zero")
    )
    clauses.append(Clause("gamma_max", np.isfinite(gam_max), gam_max, "boundedness"))

    mass = spec.kernel.mass()
    clauses.append(
        Clause(
            "kernel_mass",
            abs(mass - 1.0) <= KERNEL_MASS_TOL,
            mass,
            "normalized L1 mass",
        )
    )
    clauses.append(
        Clause(
            "kernel_nonnegative",
            bool(np.all(spec.kernel.left >= 0) and np.all(spec.kernel.right_lim >= 0)),
            float(min(spec.kernel.left.min(), spec.kernel.right_lim.min())),
        )
    )

    clauses.append(Clause("alpha_positive", spec.alpha >= 0.0, spec.alpha))
    clauses.append(Clause("horizon_positive", spec.horizon > 0.0, spec.horizon))
    clauses.append(Clause("dbar_positive", spec.dbar > 0.0, spec.dbar))

    if not spec.initial.sub_gaussian:
        warnings.append(
            "shifted-exponential initial law has only an exponential tail; "
            "the sub-Gaussian initial-moment condition is not met"
        )
    return ValidationReport(tuple(clauses), tuple(warnings))
