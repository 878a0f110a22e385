"""Shared fixtures and oracle helpers for the test suite."""

import importlib.resources

import numpy as np
import pytest
import scipy.linalg

from klift import GasParams, build_velocity_grid, load_scenario

KB = 1.380649e-23


def helium_gas() -> GasParams:
    return GasParams(
        molecular_mass=6.6464731e-27,
        mu_ref=1.9e-5,
        T_ref=273.15,
        viscosity_index=0.66,
        molecular_diameter=2.19e-10,
    )


def reference_vgrid(nv: int):
    """The shipped scenario's velocity bounds at a chosen resolution."""
    return build_velocity_grid(-9987.5, 9987.5, nv)


def scenario_path(name: str):
    return importlib.resources.files("klift") / "scenarios" / name


def load_shipped(name: str):
    return load_scenario(scenario_path(name))


@pytest.fixture
def gas():
    return helium_gas()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


class LinearODEStepper:
    """Exact flow of r' = s, s' = (r - s)/eps on (N, 2) states.

    The slow manifold is s = a r with a = (-1 + sqrt(1 + 4 eps))/(2 eps);
    the exact propagator over dt makes the stepper free of time-integration
    error, isolating the constrained-runs extrapolation error.
    """

    def __init__(self, eps: float, dt: float):
        self.eps = eps
        self.dt = dt
        A = np.array([[0.0, 1.0], [1.0 / eps, -1.0 / eps]])
        self._phi = scipy.linalg.expm(dt * A)

    @property
    def slow_slope(self) -> float:
        return (-1.0 + np.sqrt(1.0 + 4.0 * self.eps)) / (2.0 * self.eps)

    def step(self, values):
        return values @ self._phi.T

    def advance(self, values, n_steps):
        out = []
        cur = values
        for _ in range(n_steps):
            cur = self.step(cur)
            out.append(cur)
        return out


class IdentityStepper:
    """advance = no-op; turns the CR map into reset_conserved alone."""

    dt = 1.0

    def step(self, values):
        return values.copy()

    def advance(self, values, n_steps):
        return [values.copy() for _ in range(n_steps)]
