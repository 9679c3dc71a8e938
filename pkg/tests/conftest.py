"""Shared fixtures.

Converged solitons are the expensive inputs most of the suite leans on,
so they are built once per session at the two kappa values used
throughout and handed out read-only.
"""

import numpy as np
import pytest

from pointerlab import EvolutionConfig, MomentumKernel, evolve_nonlinear, soliton_seed
from pointerlab.analysis import density_width
from pointerlab.dynamics import suggest_discretization


class ConvergedSoliton:
    def __init__(self, kappa: float):
        grid, dt = suggest_discretization(kappa)
        config = EvolutionConfig(kappa=kappa, dt=dt, t_max=400.0)
        result = evolve_nonlinear(soliton_seed(grid, kappa), config)
        assert result.converged, f"soliton at kappa={kappa} did not converge"
        self.kappa = kappa
        self.grid = grid
        self.dt = dt
        self.result = result
        self.field = result.final_field
        self.width = density_width(result.final_field)
        self.kernel = MomentumKernel(grid)


@pytest.fixture(scope="session")
def sol1() -> ConvergedSoliton:
    return ConvergedSoliton(1e-1)


@pytest.fixture(scope="session")
def sol2() -> ConvergedSoliton:
    return ConvergedSoliton(1e-2)


@pytest.fixture(scope="session")
def sol3() -> ConvergedSoliton:
    return ConvergedSoliton(1e-3)


@pytest.fixture(scope="session")
def rng_table():
    """Deterministic scratch randomness for tests that just need numbers."""
    return np.random.Generator(np.random.Philox(20260815))
