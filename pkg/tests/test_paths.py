"""kernel module: front, contagiousness, front velocity, identities."""

import numpy as np
import pytest

from conftest import make_scenario
from frontsim.families import Kernel
from frontsim.paths import (
    LinearConvolver,
    PathBundle,
    StepConvolver,
    advance_front,
    current_contagiousness,
    front_velocity,
    identity_residual,
)
from oracles import brute_convolution


def grid(T, dt):
    return np.arange(int(round(T / dt)) + 1) * dt


def test_front_zero_history():
    spec = make_scenario(a0=1.5, alpha=0.7)
    I = np.zeros(101)
    for t in (0.0, 0.3, 1.0):
        assert advance_front(I, 0.01, spec, t) == pytest.approx(1.5, abs=1e-14)
        assert front_velocity(I, 0.01, spec, t) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize(
    "kernel",
    [
        ("constant", 1.0, None),
        ("triangular", 1.0, None),
        ("piecewise-linear", 1.0, [[0.0, 0.5], [0.3, 2.0], [0.3, 1.0], [1.0, 0.1]]),
    ],
)
def test_front_saturates_at_alpha(kernel):
    # I == 1 from t = 0 on; for t >= dbar the kernel mass integrates to one
    spec = make_scenario(kernel=kernel, alpha=0.5, a0=2.0)
    dt = 0.01
    I = np.ones(301)
    assert advance_front(I, dt, spec, 3.0) == pytest.approx(2.5, abs=1e-13)
    assert advance_front(I, dt, spec, 1.0, kind="linear") == pytest.approx(2.5, abs=1e-13)


def test_front_ramp_constant_kernel():
    # rho = 1/dbar, dbar=1, I_s = s on [0,1]: A_1 = a0 + alpha/2
    spec = make_scenario(kernel=("constant", 1.0, None), alpha=0.8, a0=0.0)
    dt = 0.05
    t = grid(1.0, dt)
    I = t.copy()
    assert advance_front(I, dt, spec, 1.0, kind="linear") == pytest.approx(0.4, abs=1e-14)


def test_contagiousness_zero_and_cancellation():
    spec = make_scenario(kernel=("triangular", 1.0, None))
    dt = 0.01
    I = np.zeros(401)
    assert current_contagiousness(I, dt, spec, 2.0) == pytest.approx(0.0, abs=1e-15)
    # I jumps to 1 at t=0 and stays: increments cancel for t >= 2 dbar
    I1 = np.ones(401)
    assert current_contagiousness(I1, dt, spec, 2.0) == pytest.approx(0.0, abs=1e-13)
    assert current_contagiousness(I1, dt, spec, 3.5) == pytest.approx(0.0, abs=1e-13)


def test_contagiousness_identity_value():
    # A_t = 1.5, A_{t-dbar} = 1.0, alpha = 2 -> C = 0.25 via the identity
    assert (1.5 - 1.0) / 2.0 == pytest.approx(0.25)
    # and the implementation reproduces the identity on a random step history
    spec = make_scenario(kernel=("triangular", 1.0, None), alpha=2.0)
    rng = np.random.default_rng(3)
    dt = 0.02
    I = np.cumsum(rng.random(201) < 0.05) / 40.0
    I = np.minimum(I, 1.0)
    for t in (0.9, 1.7, 2.9, 4.0):
        a_t = advance_front(I, dt, spec, t)
        a_s = advance_front(I, dt, spec, t - 1.0)
        c = current_contagiousness(I, dt, spec, t)
        assert c == pytest.approx((a_t - a_s) / 2.0, abs=1e-13)


@pytest.mark.parametrize("kind", ["step", "linear"])
def test_front_matches_brute_quadrature(kind):
    spec = make_scenario(
        kernel=("piecewise-linear", 1.0, [[0.0, 0.5], [0.4, 2.0], [1.0, 0.2]]),
        alpha=0.6,
        a0=0.3,
    )
    dt = 0.05
    t_grid = grid(3.0, dt)
    rng = np.random.default_rng(11)
    I = np.minimum(np.cumsum(rng.random(len(t_grid)) * 0.01), 1.0)

    def I_fn(s):
        s = np.asarray(s)
        if kind == "step":
            idx = np.clip(np.floor(s / dt + 1e-12).astype(int), 0, len(I) - 1)
            out = I[idx]
        else:
            out = np.interp(s, t_grid, I)
        return np.where(s < 0, 0.0, out)

    for t in (0.62, 1.0, 2.13):
        ref = spec.a0 + spec.alpha * brute_convolution(I_fn, spec.kernel.rho, t, 1.0)
        got = advance_front(I, dt, spec, t, kind=kind)
        assert got == pytest.approx(ref, abs=5e-7)


def test_front_velocity_constant_kernel_reduction():
    # rho = 1/dbar: A' = (alpha/dbar)(I_t - I_{t-dbar})
    spec = make_scenario(kernel=("constant", 0.5, None), alpha=0.9)
    dt = 0.025
    t_grid = grid(2.0, dt)
    rng = np.random.default_rng(5)
    I = np.minimum(np.cumsum(rng.random(len(t_grid)) * 0.02), 1.0)
    for t in (0.5, 0.8, 1.5):
        k = int(round(t / dt))
        k_s = int(round((t - 0.5) / dt))
        expected = (0.9 / 0.5) * (I[k] - I[k_s])
        assert front_velocity(I, dt, spec, t) == pytest.approx(expected, abs=1e-12)


def test_front_velocity_zero_history():
    spec = make_scenario(kernel=("triangular", 1.0, None))
    I = np.zeros(100)
    assert front_velocity(I, 0.01, spec, 0.9) == pytest.approx(0.0, abs=1e-15)


def test_front_velocity_central_difference_oracle():
    # smooth synthetic I: finite differences of A match A' to O(dt)
    spec = make_scenario(kernel=("triangular", 1.0, None), alpha=0.7, a0=0.0)
    dt = 1e-3
    t_grid = grid(3.0, dt)
    I = 1.0 - np.exp(-t_grid)  # smooth, increasing, in [0,1]

    def A(t):
        return advance_front(I, dt, spec, t, kind="linear")

    h = 1e-4
    for t in (0.7, 1.3, 2.5):
        fd = (A(t + h) - A(t - h)) / (2 * h)
        got = front_velocity(I, dt, spec, t, kind="linear")
        assert got == pytest.approx(fd, abs=5e-3)


def test_front_velocity_rate_form_matches_bv_form():
    spec = make_scenario(kernel=("triangular", 1.0, None), alpha=0.7)
    dt = 1e-3
    t_grid = grid(3.0, dt)
    I = 1.0 - np.exp(-t_grid)
    Iprime = np.exp(-t_grid)
    for t in (0.5, 1.2, 2.8):
        bv = front_velocity(I, dt, spec, t, kind="linear")
        rate = front_velocity(I, dt, spec, t, Iprime=Iprime)
        assert rate == pytest.approx(bv, rel=2e-3, abs=2e-4)


def test_front_velocity_integrates_back_to_front():
    # a0 + cumulative sum of the I'-convolution reproduces advance_front to O(dt)
    spec = make_scenario(kernel=("triangular", 1.0, None), alpha=0.7)
    dt = 2e-3
    t_grid = grid(2.0, dt)
    I = 1.0 - np.exp(-t_grid)
    Iprime = np.exp(-t_grid)
    acc = spec.a0
    for k in range(1, len(t_grid)):
        v0 = front_velocity(I, dt, spec, t_grid[k - 1], Iprime=Iprime)
        v1 = front_velocity(I, dt, spec, t_grid[k], Iprime=Iprime)
        acc += 0.5 * (v0 + v1) * dt
    direct = advance_front(I, dt, spec, t_grid[-1], kind="linear")
    assert acc == pytest.approx(direct, abs=5 * dt)


def test_monotone_history_gives_monotone_front():
    spec = make_scenario(kernel=("triangular", 1.0, None), alpha=0.5)
    dt = 0.02
    rng = np.random.default_rng(17)
    I = np.minimum(np.cumsum(rng.random(151) * 0.02), 1.0)
    A = [advance_front(I, dt, spec, t) for t in grid(3.0, dt)]
    assert np.all(np.diff(A) >= -1e-14)


@pytest.mark.parametrize(
    "kernel",
    [
        ("constant", 1.0, None),
        ("triangular", 1.0, None),
        ("piecewise-linear", 0.8, [[0.0, 1.0], [0.5, 0.2], [0.8, 0.9]]),
    ],
)
def test_convolvers_match_reference(kernel):
    spec = make_scenario(kernel=kernel, alpha=0.5, a0=0.25)
    dt = 0.04
    t_grid = grid(3.0, dt)
    rng = np.random.default_rng(23)
    I = np.minimum(np.cumsum(rng.random(len(t_grid)) * 0.015), 1.0)
    sc = StepConvolver(spec.kernel, dt)
    lc = LinearConvolver(spec.kernel, dt)
    for k in (0, 1, 7, 30, 74):
        t = t_grid[k]
        assert sc.front(I, k, spec.a0, spec.alpha) == pytest.approx(
            advance_front(I, dt, spec, t, kind="step"), abs=1e-12
        )
        assert sc.contagiousness(I, k) == pytest.approx(
            current_contagiousness(I, dt, spec, t, kind="step"), abs=1e-12
        )
        assert lc.front(I, k, spec.a0, spec.alpha) == pytest.approx(
            advance_front(I, dt, spec, t, kind="linear"), abs=1e-12
        )
        assert lc.contagiousness(I, k) == pytest.approx(
            current_contagiousness(I, dt, spec, t, kind="linear"), abs=1e-12
        )
        assert lc.velocity_from_rate(I, k, spec.alpha) == pytest.approx(
            front_velocity(np.zeros_like(I), dt, spec, t, Iprime=I), abs=1e-12
        )


def test_identity_residual_on_random_step_history():
    spec = make_scenario(kernel=("triangular", 1.0, None), alpha=0.5, a0=0.0)
    dt = 0.01
    t_grid = grid(3.0, dt)
    rng = np.random.default_rng(29)
    I = np.minimum(np.cumsum(rng.random(len(t_grid)) * 0.01), 1.0)
    A = np.array([advance_front(I, dt, spec, t) for t in t_grid])
    C = np.array([current_contagiousness(I, dt, spec, t) for t in t_grid])
    Ap = np.array([front_velocity(I, dt, spec, t) for t in t_grid])
    bundle = PathBundle(t_grid, I, A, C, Ap)
    assert identity_residual(bundle, spec) <= 1e-10


def test_pathbundle_table_roundtrip():
    t = np.linspace(0, 1, 5)
    b = PathBundle(t, t * 0.1, 1 + t, t * 0.2, np.cos(t))
    again = PathBundle.from_table(b.to_table())
    for name in ("t", "I", "A", "C", "Aprime"):
        assert np.array_equal(getattr(b, name), getattr(again, name))
