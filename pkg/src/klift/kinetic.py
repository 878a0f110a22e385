"""Velocity grids, field containers, discrete equilibrium, and restriction.

All quantities are SI.  Distribution values are number density per velocity,
1/(m^3 (m/s)), optionally multiplied by a scale factor (typically the
molecular mass) that is carried on the field so restriction stays
scale-aware.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConvergenceError, NumericalError, ZeroDensityError

BOLTZMANN = 1.380649e-23  # J/K


@dataclass(frozen=True)
class GasParams:
    """Physical constants of the simulated gas."""

    molecular_mass: float       # kg
    mu_ref: float               # Pa s, reference viscosity
    T_ref: float                # K, reference temperature
    viscosity_index: float      # dimensionless exponent of the viscosity law
    molecular_diameter: float   # m, gas-kinetic diameter (mean free path)
    boltzmann_const: float = BOLTZMANN

    def __post_init__(self):
        for name in ("molecular_mass", "mu_ref", "T_ref",
                     "molecular_diameter", "boltzmann_const"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"GasParams.{name} must be positive")
        if self.viscosity_index < 0.0:
            raise ValueError("GasParams.viscosity_index must be nonnegative")


@dataclass(frozen=True, eq=False)
class VelocityGrid:
    """Cell-centered discrete velocity set."""

    n_velocities: int
    v_min: float
    v_max: float
    dv: float
    velocities: np.ndarray  # (Nv,), strictly increasing

    @property
    def max_speed(self) -> float:
        return float(np.abs(self.velocities).max())


def build_velocity_grid(v_min: float, v_max: float, n_velocities: int) -> VelocityGrid:
    """Cell-centered grid: v_i = v_min + dv/2 + i dv, dv = (v_max - v_min)/Nv."""
    if n_velocities < 2:
        raise ValueError("n_velocities must be at least 2")
    if not v_min < v_max:
        raise ValueError("v_min must be smaller than v_max")
    dv = (v_max - v_min) / n_velocities
    v = v_min + dv / 2.0 + dv * np.arange(n_velocities)
    return VelocityGrid(n_velocities, float(v_min), float(v_max), dv, v)


@dataclass(frozen=True, eq=False)
class SpatialGrid:
    """Uniform cell-centered spatial grid on [0, L)."""

    n_cells: int
    dx: float
    length: float
    centers: np.ndarray  # (N,)


def build_spatial_grid(length: float, n_cells: int) -> SpatialGrid:
    if n_cells < 1:
        raise ValueError("n_cells must be positive")
    if length <= 0.0:
        raise ValueError("length must be positive")
    dx = length / n_cells
    x = dx / 2.0 + dx * np.arange(n_cells)
    return SpatialGrid(n_cells, dx, float(length), x)


@dataclass
class DistributionField:
    """f(x_j, v_i) on a spatial x velocity grid.

    ``values`` holds scale * f; ``scale`` is 1 for physical values or the
    molecular mass when fields are mass-rescaled for conditioning.
    """

    grid: SpatialGrid
    vgrid: VelocityGrid
    values: np.ndarray  # (N, Nv)
    time: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        expected = (self.grid.n_cells, self.vgrid.n_velocities)
        if self.values.shape != expected:
            raise ValueError(f"values shape {self.values.shape} != {expected}")
        if not np.all(np.isfinite(self.values)):
            raise NumericalError("distribution field contains non-finite entries")

    def physical_values(self) -> np.ndarray:
        return self.values / self.scale

    def with_values(self, values: np.ndarray, time: float | None = None) -> "DistributionField":
        return replace(self, values=values, time=self.time if time is None else time)


@dataclass
class MacroFields:
    """Per-cell conserved macroscopic state (n, u, T)."""

    number_density: np.ndarray  # 1/m^3
    velocity: np.ndarray        # m/s
    temperature: np.ndarray     # K


@dataclass
class EquilibriumCoeffs:
    """Per-cell coefficients of f_eq = A exp(-B^2 (v - D)^2)."""

    A: np.ndarray
    B: np.ndarray
    D: np.ndarray


def equilibrium_coeffs(
    n: np.ndarray,
    u: np.ndarray,
    T: np.ndarray,
    vgrid: VelocityGrid,
    gas: GasParams,
    *,
    B0: np.ndarray | None = None,
    D0: np.ndarray | None = None,
    tol: float = 1e-13,
    max_iter: int = 50,
) -> EquilibriumCoeffs:
    """Solve the discrete conservation equations for (A, B, D).

    Newton on the pair R_1 = 0, R_2 - R_0 k_B T / m = 0 with
    R_j = dv sum_i (v_i - u)^j exp(-B^2 (v_i - D)^2), then A = n / R_0.
    The 2x2 Jacobian is closed form.  Residuals are nondimensionalized with
    the thermal speed so ``tol`` is a relative tolerance.  Vectorized over
    cells.
    """
    n = np.atleast_1d(np.asarray(n, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    T = np.atleast_1d(np.asarray(T, dtype=float))
    if np.any(n <= 0.0):
        raise ValueError("number density must be positive")
    if np.any(T <= 0.0):
        raise ValueError("temperature must be positive")

    kB, m = gas.boltzmann_const, gas.molecular_mass
    v = vgrid.velocities
    dv = vgrid.dv
    vt = np.sqrt(kB * T / m)  # thermal speed scale

    B = np.sqrt(m / (2.0 * kB * T)) if B0 is None else np.array(B0, dtype=float)
    D = u.copy() if D0 is None else np.array(D0, dtype=float)

    w = v[None, :] - u[:, None]
    w2 = w * w
    active = np.ones(n.shape, dtype=bool)
    res = np.full(n.shape, np.inf)
    E = None
    for _ in range(max_iter):
        S = v[None, :] - D[:, None]
        E = np.exp(-((B[:, None] * S) ** 2))
        R0 = dv * E.sum(axis=1)
        R1 = dv * (w * E).sum(axis=1)
        R2 = dv * (w2 * E).sum(axis=1)
        F1 = R1
        F2 = R2 - R0 * kB * T / m
        res = np.maximum(np.abs(F1) / (R0 * vt), np.abs(F2) / (R0 * vt * vt))
        active = res > tol
        if not active.any():
            break

        S2 = S * S
        dE_dB = -2.0 * B[:, None] * S2 * E
        dE_dD = 2.0 * (B * B)[:, None] * S * E
        J11 = dv * (w * dE_dB).sum(axis=1)
        J12 = dv * (w * dE_dD).sum(axis=1)
        J21 = dv * (w2 * dE_dB).sum(axis=1) - dv * dE_dB.sum(axis=1) * kB * T / m
        J22 = dv * (w2 * dE_dD).sum(axis=1) - dv * dE_dD.sum(axis=1) * kB * T / m
        det = J11 * J22 - J12 * J21
        if np.any(active & (det == 0.0)):
            raise NumericalError("singular Jacobian in equilibrium Newton solve")
        dB = -(F1 * J22 - F2 * J12) / det
        dD = -(J11 * F2 - J21 * F1) / det

        Bn = B + np.where(active, dB, 0.0)
        # keep B positive; halve instead of crossing zero
        bad = active & (Bn <= 0.0)
        Bn[bad] = 0.5 * B[bad]
        B = Bn
        D = D + np.where(active, dD, 0.0)

    if active.any():
        worst = float(res[active].max())
        raise ConvergenceError(
            f"equilibrium Newton solve did not converge (residual {worst:.3e})",
            residual=worst,
        )

    R0 = dv * E.sum(axis=1)
    A = n / R0
    return EquilibriumCoeffs(A=A, B=B, D=D)


def discrete_equilibrium(
    n,
    u,
    T,
    vgrid: VelocityGrid,
    gas: GasParams,
    **kwargs,
) -> tuple[np.ndarray, EquilibriumCoeffs]:
    """Discrete Maxwell-Boltzmann equilibrium for cell values (n, u, T).

    Returns (f_eq, coeffs) with f_eq of shape (N, Nv) (or (1, Nv) for
    scalars).  The three dv-weighted sums reproduce n, n u and n k_B T / m
    to the Newton tolerance.
    """
    coeffs = equilibrium_coeffs(n, u, T, vgrid, gas, **kwargs)
    S = vgrid.velocities[None, :] - coeffs.D[:, None]
    feq = coeffs.A[:, None] * np.exp(-((coeffs.B[:, None] * S) ** 2))
    return feq, coeffs


def equilibrium_field(
    macro: MacroFields,
    grid: SpatialGrid,
    vgrid: VelocityGrid,
    gas: GasParams,
    *,
    scale: float = 1.0,
    time: float = 0.0,
    **kwargs,
) -> DistributionField:
    """Equilibrium DistributionField matching per-cell (n, u, T)."""
    feq, _ = discrete_equilibrium(
        macro.number_density, macro.velocity, macro.temperature, vgrid, gas, **kwargs
    )
    return DistributionField(grid, vgrid, scale * feq, time=time, scale=scale)


def restrict(f: DistributionField, gas: GasParams) -> MacroFields:
    """Velocity moments of the field: per-cell (n, u, T), scale-aware.

    n = dv sum f, u = dv sum v f / n, T = (m / (k_B n)) dv sum (v - u)^2 f
    with the one-dimensional normalization.
    """
    vals = f.physical_values()
    v = f.vgrid.velocities
    dv = f.vgrid.dv
    n = dv * vals.sum(axis=1)
    bad = np.nonzero(n == 0.0)[0]
    if bad.size:
        raise ZeroDensityError(int(bad[0]))
    u = dv * (vals * v[None, :]).sum(axis=1) / n
    w2 = (v[None, :] - u[:, None]) ** 2
    T = (gas.molecular_mass / (gas.boltzmann_const * n)) * dv * (w2 * vals).sum(axis=1)
    return MacroFields(number_density=n, velocity=u, temperature=T)


def relaxation_frequency(macro: MacroFields, gas: GasParams) -> np.ndarray:
    """BGK relaxation frequency omega = n k_B T / mu(T), per cell."""
    T = macro.temperature
    mu = gas.mu_ref * (T / gas.T_ref) ** gas.viscosity_index
    return macro.number_density * gas.boltzmann_const * T / mu


def mean_free_path(gas: GasParams, n: float) -> float:
    """lambda = 1 / (sqrt(2) pi d^2 n)."""
    if n <= 0.0:
        raise ValueError("number density must be positive")
    return 1.0 / (math.sqrt(2.0) * math.pi * gas.molecular_diameter**2 * n)


def truncated_mass_fraction(n, u, T, vgrid: VelocityGrid, gas: GasParams) -> np.ndarray:
    """Fraction of the continuous Maxwellian outside [v_min, v_max].

    Diagnostic only: the velocity bounds may clip a hot Maxwellian; we report
    the clipped fraction instead of rejecting such states.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    T = np.atleast_1d(np.asarray(T, dtype=float))
    b = np.sqrt(gas.molecular_mass / (2.0 * gas.boltzmann_const * T))
    erf = np.vectorize(math.erf)
    inside = 0.5 * (erf(b * (vgrid.v_max - u)) - erf(b * (vgrid.v_min - u)))
    return 1.0 - inside
