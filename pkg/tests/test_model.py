"""model module: families, kernel normalization, initial laws, validation."""

import numpy as np
import pytest

from conftest import make_scenario
from frontsim.families import CoefficientFamily, InitialDistribution, Kernel
from frontsim.scenario import (
    ScenarioError,
    dumps_scenario,
    eval_coefficients,
    loads_scenario,
    sample_initial,
    validate_scenario,
)
from oracles import truncated_gaussian_mean


def test_validate_constant_scenario_passes():
    spec = make_scenario(sigma=("constant", (1.0,)), gamma=("constant", (0.5,)))
    rep = validate_scenario(spec)
    assert rep.ok
    assert rep.constant("sigma_min") == pytest.approx(1.0)
    assert rep.constant("gamma_min") == pytest.approx(0.5)


def test_validate_rejects_degenerate_sigma():
    spec = make_scenario(sigma=("sigmoid", (0.0, 0.5)))
    rep = validate_scenario(spec)
    assert not rep.ok
    names = {c.name: c.passed for c in rep.clauses}
    assert names["sigma_min"] is False


def test_validate_rejects_vanishing_gamma():
    spec = make_scenario(gamma=("constant", (0.0,)))
    rep = validate_scenario(spec)
    assert not rep.ok


def test_kernel_normalization_forced():
    # raw triangular-mass-2 nodes are normalized at construction
    k = Kernel.piecewise_linear(1.0, [(0.0, 0.0), (0.5, 8.0), (1.0, 0.0)])
    assert abs(k.mass() - 1.0) <= 1e-12


@pytest.mark.parametrize(
    "kernel",
    [
        Kernel.constant(1.0),
        Kernel.constant(0.37),
        Kernel.triangular(2.0),
        Kernel.piecewise_linear(1.5, [(0.0, 1.0), (0.4, 3.0), (0.4, 0.5), (1.5, 0.2)]),
        Kernel.piecewise_linear(1.0, [(0.0, 0.3), (0.25, 2.0), (0.8, 0.1), (1.0, 0.7)]),
    ],
)
def test_kernel_mass_is_one(kernel):
    assert abs(kernel.mass() - 1.0) <= 1e-12
    # cumulative agrees with dense numerical integration of rho
    us = np.linspace(0.0, kernel.duration, 100001)
    approx = np.cumsum(kernel.rho(us)) * (us[1] - us[0])
    assert abs(kernel.cumulative(kernel.duration) - 1.0) <= 1e-12
    assert abs(approx[-1] - 1.0) < 5e-4


def test_kernel_negative_nodes_rejected():
    with pytest.raises(ValueError):
        Kernel.piecewise_linear(1.0, [(0.0, 1.0), (1.0, -0.5)])
    with pytest.raises(ValueError):
        Kernel.piecewise_linear(1.0, [(0.0, 0.0), (1.0, 0.0)])


def test_kernel_integral_against_linear_exact():
    k = Kernel.triangular(1.0)
    # int_0^1 rho(u) u du for the normalized triangle = 0.5 by symmetry
    assert k.integral_against_linear(0.0, 1.0, 0.0, 1.0) == pytest.approx(0.5, abs=1e-14)
    # against a dense reference on a sub-interval
    us = np.linspace(0.1, 0.77, 400001)
    ref = np.trapezoid(k.rho(us) * (2.0 - 3.0 * us), us)
    assert k.integral_against_linear(0.1, 0.77, 2.0, -3.0) == pytest.approx(ref, abs=1e-8)


def test_eval_coefficients_affine_and_constant():
    spec = make_scenario(b=("affine", (0.1, -0.2)), sigma=("constant", (0.8,)))
    b, s, s2 = eval_coefficients(spec, 0.3, 1.0)
    assert b == pytest.approx(-0.1)
    assert s == pytest.approx(0.8)
    assert s2 == pytest.approx(0.64)


def test_sigmoid_sigma_limits():
    fam = CoefficientFamily("sigmoid", (0.5, 0.5))
    assert fam(0.0, -60.0) == pytest.approx(0.5, abs=1e-12)
    assert fam(0.0, 60.0) == pytest.approx(1.0, abs=1e-12)


def test_time_modulation_stays_in_bounds():
    fam = CoefficientFamily("sigmoid", (0.5, 0.5), mod_eps=0.3, mod_omega=2.0)
    ts = np.linspace(0, 10, 401)
    vals = np.array([fam(t, 0.0) for t in ts])
    lo, hi = fam.declared_range()
    assert lo > 0
    assert np.all(vals >= lo - 1e-12)
    assert np.all(vals <= hi + 1e-12)


def test_probed_lipschitz_within_declared(default_scenario):
    rep = validate_scenario(default_scenario, n_probe=161)
    assert rep.constant("kappa") <= 1.01 * max(
        default_scenario.drift.declared_lipschitz(),
        default_scenario.drift.declared_growth(),
    )
    assert rep.ok


@pytest.mark.parametrize(
    "fam,xs",
    [
        (CoefficientFamily("constant", (0.8,)), np.linspace(-10, 10, 3001)),
        (CoefficientFamily("affine", (0.5, -0.5)), np.linspace(-10, 10, 3001)),
        (CoefficientFamily("sigmoid", (0.5, 0.5)), np.linspace(-10, 10, 3001)),
        (CoefficientFamily("logistic", (0.2, 1.8, 4.0, 0.25)), np.linspace(0, 1, 3001)),
        (CoefficientFamily("sigmoid", (0.5, 0.5), mod_eps=0.2, mod_omega=3.0),
         np.linspace(-10, 10, 3001)),
    ],
)
def test_every_family_probed_lipschitz_within_declared(fam, xs):
    # refined-lattice difference quotients never beat the declared constant by > 1%
    probed = 0.0
    for t in np.linspace(0.0, 2.0, 41):
        vals = fam(t, xs)
        probed = max(probed, float(np.max(np.abs(np.diff(vals)) / np.diff(xs))))
    assert probed <= 1.01 * fam.declared_lipschitz() + 1e-12


def test_sample_point_mass(rng):
    spec = make_scenario(initial=("point-mass", (2.0,)))
    assert np.array_equal(sample_initial(spec, 3, rng), [2.0, 2.0, 2.0])


def test_sample_truncated_gaussian_mean():
    spec = make_scenario(initial=("truncated-gaussian", (1.0, 0.75)), a0=0.0)
    n = 10**6
    draws = sample_initial(spec, n, np.random.default_rng(7))
    assert np.all(draws >= 0.0)
    exact = truncated_gaussian_mean(1.0, 0.75, 0.0)
    assert spec.initial.mean(0.0) == pytest.approx(exact)
    se = draws.std(ddof=1) / np.sqrt(n)
    assert abs(draws.mean() - exact) < 3 * se


def test_sampling_deterministic_per_seed():
    spec = make_scenario(initial=("truncated-gaussian", (1.0, 0.75)))
    a = sample_initial(spec, 1000, np.random.default_rng(42))
    b = sample_initial(spec, 1000, np.random.default_rng(42))
    assert np.array_equal(a, b)


def test_exponential_initial_warns():
    spec = make_scenario(initial=("shifted-exponential", (2.0,)))
    rep = validate_scenario(spec)
    assert rep.ok
    assert any("tail" in w for w in rep.warnings)


def test_scenario_roundtrip_byte_identical(default_scenario):
    text = dumps_scenario(default_scenario)
    again = dumps_scenario(loads_scenario(text))
    assert text == again
    assert loads_scenario(text) == default_scenario


def test_scenario_roundtrip_piecewise_kernel():
    spec = make_scenario(kernel=("piecewise-linear", 1.5, [[0.0, 1.0], [0.5, 2.0], [1.5, 0.0]]))
    text = dumps_scenario(spec)
    assert dumps_scenario(loads_scenario(text)) == text


def test_unknown_keys_rejected(default_scenario):
    text = dumps_scenario(default_scenario) + "\n[extra]\nfoo = 1.0\n"
    with pytest.raises(ScenarioError):
        loads_scenario(text)
    text2 = dumps_scenario(default_scenario).replace(
        "[kernel]\n", "[kernel]\nbogus = 3.0\n"
    )
    with pytest.raises(ScenarioError):
        loads_scenario(text2)


def test_point_mass_below_a0_rejected():
    with pytest.raises(ValueError):
        make_scenario(initial=("point-mass", (-1.0,)), a0=0.0)
