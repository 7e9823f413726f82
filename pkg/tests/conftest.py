import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from frontsim.families import CoefficientFamily, InitialDistribution, Kernel
from frontsim.scenario import ScenarioSpec


def make_scenario(
    b=("constant", (0.0,)),
    sigma=("constant", (1.0,)),
    gamma=("constant", (0.5,)),
    kernel=("constant", 1.0, None),
    alpha=0.5,
    a0=0.0,
    horizon=1.0,
    initial=None,
):
    if initial is None:
        initial = ("point-mass", (a0 + 1.0,))
    return ScenarioSpec(
        drift=CoefficientFamily(b[0], b[1]),
        diffusion=CoefficientFamily(sigma[0], sigma[1]),
        reactivity=CoefficientFamily(gamma[0], gamma[1]),
        kernel=Kernel.make(kernel[0], kernel[1], kernel[2]),
        alpha=alpha,
        a0=a0,
        horizon=horizon,
        initial=InitialDistribution(initial[0], initial[1]),
    )


@pytest.fixture(scope="session")
def default_scenario():
    """The shipped epidemic scenario: every term of the dynamics active."""
    return make_scenario(
        b=("affine", (0.5, -0.5)),
        sigma=("constant", (1.0,)),
        gamma=("logistic", (0.2, 1.8, 4.0, 0.25)),
        kernel=("triangular", 1.0, None),
        alpha=0.5,
        a0=0.0,
        horizon=2.0,
        initial=("truncated-gaussian", (1.0, 0.75)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
