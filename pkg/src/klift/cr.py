"""Constrained-runs lifting: the one-step CR map, Picard iteration, and the
matrix-free Newton-GMRES solve of s - C_m(r0, s) = 0.

A microscopic stepper is anything with ``dt`` and
``advance(values, n_steps) -> [values at dt, 2dt, ...]`` acting on (N, q)
arrays.  One CR map advances the guess m+1 steps, backward-extrapolates with
the order-m weights, and resets the conserved moments to those of the target
state f0.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import ConvergenceError, NumericalError
from .kinetic import (
    DistributionField,
    GasParams,
    MacroFields,
    equilibrium_field,
    restrict,
)
from .moments import MomentBasis, project_complement, reset_conserved

MAX_ORDER = 8


def cr_weights(order_m: int) -> np.ndarray:
    """Backward-extrapolation weights w_j = (-1)^(j+1) C(m+1, j), j = 1..m+1.

    Row m of the forward-difference table; the weights always sum to one.
    """
    if not 0 <= order_m <= MAX_ORDER:
        raise ValueError(f"order_m must lie in [0, {MAX_ORDER}]")
    return np.array(
        [(-1.0) ** (j + 1) * math.comb(order_m + 1, j) for j in range(1, order_m + 2)]
    )


@dataclass(frozen=True)
class GMRESParams:
    tol: float = 1e-6
    max_iters: int = 200
    restart: int | None = None  # None = single cycle of max_iters iterations


@dataclass(frozen=True)
class CRConfig:
    order_m: int = 0
    solver: str = "newton"          # "picard" | "newton"
    picard_tol: float = 1e-12
    newton_tol: float = 1e-10
    fd_epsilon: float | None = None  # None = sqrt(machine eps), norm-scaled
    max_picard_iters: int = 2000
    max_newton_iters: int = 20
    gmres: GMRESParams = field(default_factory=GMRESParams)

    def __post_init__(self):
        cr_weights(self.order_m)  # validates the order
        if self.solver not in ("picard", "newton"):
            raise ValueError("solver must be 'picard' or 'newton'")

    @property
    def weights(self) -> np.ndarray:
        return cr_weights(self.order_m)


@dataclass
class LiftReport:
    solver: str
    iterations: int
    final_residual: float
    residual_history: list[float]
    conserved_drift: float
    wall_time: float
    gmres_iterations: int = 0
    converged: bool = True


def cr_map(
    stepper,
    basis: MomentBasis,
    f0: np.ndarray,
    f_guess: np.ndarray,
    order_m: int,
    *,
    naive_P: np.ndarray | None = None,
) -> np.ndarray:
    """One CR step C_m: advance, extrapolate backward, reset conserved moments.

    ``naive_P`` switches the reset to the inverse-based projector
    P = I - M^{-1} M0 (failure-study mode); by default the QR projector is
    applied without ever materializing a q x q matrix.
    """
    if f0.shape != f_guess.shape:
        raise ValueError("f0 and f_guess must share shapes")
    w = cr_weights(order_m)
    states = stepper.advance(f_guess, order_m + 1)
    f_pre = w[0] * states[0]
    for wj, st in zip(w[1:], states[1:]):
        f_pre += wj * st
    if not np.all(np.isfinite(f_pre)):
        raise NumericalError(f"non-finite extrapolation in CR map (order {order_m})")
    if naive_P is None:
        return reset_conserved(basis, f_pre, f0)
    q = basis.q
    return f_pre @ naive_P.T + f0 @ (np.eye(q) - naive_P).T


def conserved_drift(basis: MomentBasis, f: np.ndarray, f0: np.ndarray) -> float:
    """Max relative deviation of the first k raw moments from those of f0.

    Each moment row is normalized by the largest attainable magnitude
    |f0| |M0|^T over the cells, so a moment that cancels to zero (momentum at
    u ~ 0) does not blow up the relative measure.
    """
    m = np.atleast_2d(basis.conserved_moments(f))
    m0 = np.atleast_2d(basis.conserved_moments(f0))
    attain = np.atleast_2d(np.abs(f0) @ np.abs(basis.M0[: basis.k]).T)
    row_scale = np.maximum(attain.max(axis=0), np.finfo(float).tiny)
    return float(np.max(np.abs(m - m0) / row_scale))


def lift_picard(
    stepper,
    basis: MomentBasis,
    f0: np.ndarray,
    cfg: CRConfig,
    *,
    f_guess: np.ndarray | None = None,
    naive_P: np.ndarray | None = None,
) -> tuple[np.ndarray, LiftReport]:
    """Fixed-point iteration f <- C_m(r0, f) starting from f0.

    Stops when the two-norm of the change in the unconserved components
    drops below ``picard_tol``; raises ConvergenceError (with the residual
    history) if the iteration stalls or diverges.  ``f_guess`` warm-starts
    the iteration from a state other than f0.
    """
    t0 = _time.perf_counter()
    f = f0.copy() if f_guess is None else f_guess.copy()
    history: list[float] = []
    for it in range(1, cfg.max_picard_iters + 1):
        f_new = cr_map(stepper, basis, f0, f, cfg.order_m, naive_P=naive_P)
        resid = float(np.linalg.norm(project_complement(basis, f_new - f)))
        history.append(resid)
        f = f_new
        if resid < cfg.picard_tol:
            report = LiftReport(
                solver="picard",
                iterations=it,
                final_residual=resid,
                residual_history=history,
                conserved_drift=conserved_drift(basis, f, f0),
                wall_time=_time.perf_counter() - t0,
            )
            return f, report
    raise ConvergenceError(
        f"Picard CR iteration did not reach {cfg.picard_tol:g} "
        f"in {cfg.max_picard_iters} iterations (last residual {history[-1]:.3e})",
        residual=history[-1],
        history=history,
    )


def lift_newton(
    stepper,
    basis: MomentBasis,
    f0: np.ndarray,
    cfg: CRConfig,
    *,
    f_guess: np.ndarray | None = None,
    naive_P: np.ndarray | None = None,
) -> tuple[np.ndarray, LiftReport]:
    """Newton-GMRES solve of g(f) = f - C_m(r0, f) = 0.

    The Jacobian action is matrix-free: forward differences of the CR map
    with a perturbation scaled by fd_epsilon * (1 + ||f||) / ||v||.  The
    conserved moments stay pinned because every CR evaluation resets them;
    a final reset removes the last rounding-level drift.
    """
    t0 = _time.perf_counter()
    shape = f0.shape
    dim = f0.size
    eps0 = cfg.fd_epsilon if cfg.fd_epsilon is not None else math.sqrt(np.finfo(float).eps)
    f = f0.copy() if f_guess is None else f_guess.copy()
    history: list[float] = []
    gmres_total = 0

    for it in range(cfg.max_newton_iters + 1):
        Cf = cr_map(stepper, basis, f0, f, cfg.order_m, naive_P=naive_P)
        g = (f - Cf).ravel()
        resid = float(np.linalg.norm(g))
        history.append(resid)
        if resid < cfg.newton_tol:
            f = reset_conserved(basis, f, f0)
            report = LiftReport(
                solver="newton",
                iterations=it,
                final_residual=resid,
                residual_history=history,
                conserved_drift=conserved_drift(basis, f, f0),
                wall_time=_time.perf_counter() - t0,
                gmres_iterations=gmres_total,
            )
            return f, report
        if it == cfg.max_newton_iters:
            break
        if len(history) >= 3 and history[-1] > history[-2] > history[-3]:
            raise ConvergenceError(
                "Newton CR iteration diverging",
                residual=resid,
                history=history,
            )

        fnorm = float(np.linalg.norm(f))

        def matvec(v, _f=f, _Cf=Cf, _fnorm=fnorm):
            vnorm = float(np.linalg.norm(v))
            if vnorm == 0.0:
                return np.zeros_like(v)
            h = eps0 * (1.0 + _fnorm) / vnorm
            pert = _f + h * v.reshape(shape)
            Cp = cr_map(stepper, basis, f0, pert, cfg.order_m, naive_P=naive_P)
            return v - ((Cp - _Cf).ravel() / h)

        counter = {"n": 0}

        def cb(_pr_norm):
            counter["n"] += 1

        op = LinearOperator((dim, dim), matvec=matvec, dtype=float)
        restart = cfg.gmres.restart if cfg.gmres.restart is not None else min(dim, cfg.gmres.max_iters)
        maxiter = max(1, cfg.gmres.max_iters // restart)
        delta, info = gmres(
            op,
            -g,
            rtol=cfg.gmres.tol,
            atol=0.0,
            restart=restart,
            maxiter=maxiter,
            callback=cb,
            callback_type="pr_norm",
        )
        gmres_total += counter["n"]
        if info != 0:
            raise ConvergenceError(
                f"GMRES stagnated in Newton step {it} (info={info})",
                residual=resid,
                history=history,
            )
        f = f + delta.reshape(shape)

    raise ConvergenceError(
        f"Newton CR iteration did not reach {cfg.newton_tol:g} "
        f"in {cfg.max_newton_iters} iterations (last residual {history[-1]:.3e})",
        residual=history[-1],
        history=history,
    )


def lift_macro(
    stepper,
    basis: MomentBasis,
    macro: MacroFields,
    gas: GasParams,
    cfg: CRConfig,
    *,
    grid,
    vgrid,
    scale: float = 1.0,
    time: float = 0.0,
    f_guess: np.ndarray | None = None,
) -> tuple[DistributionField, LiftReport]:
    """Lift (n, u, T) to a distribution field.

    The conserved-moment target is the per-cell discrete equilibrium of the
    macro fields; it also serves as the initial iterate unless ``f_guess``
    provides one (e.g. the solution at a lower extrapolation order, which
    keeps high-order iterates close to the slow manifold).
    """
    f0 = equilibrium_field(macro, grid, vgrid, gas, scale=scale, time=time)
    solve = lift_newton if cfg.solver == "newton" else lift_picard
    values, report = solve(stepper, basis, f0.values, cfg, f_guess=f_guess)
    return f0.with_values(values), report


@dataclass
class RestrictLiftError:
    """Diagnostics comparing a lifted field against a reference field."""

    two_norm: float                # flattened vector two-norm of the difference
    spectral_norm: float           # largest singular value (Matlab matrix norm)
    cell_abs_sums: np.ndarray      # (N,): sum_i |f_i - fc_i| per cell
    relative_error: np.ndarray     # (N, Nv): |f - fc| / |fc|
    exact_zero: np.ndarray         # (N, Nv) bool: where f - fc == 0 exactly


def restrict_lift_error(reference: DistributionField, lifted: DistributionField) -> RestrictLiftError:
    """Two-norm, per-cell absolute sums, and the relative-error field."""
    if reference.values.shape != lifted.values.shape:
        raise ValueError("reference and lifted fields have mismatched grids")
    if not np.allclose(reference.vgrid.velocities, lifted.vgrid.velocities):
        raise ValueError("reference and lifted fields have mismatched velocity grids")
    diff = lifted.values - reference.values
    zero = diff == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(diff) / np.abs(reference.values)
    rel[zero] = 0.0
    return RestrictLiftError(
        two_norm=float(np.linalg.norm(diff.ravel())),
        spectral_norm=float(np.linalg.norm(diff, 2)),
        cell_abs_sums=np.abs(diff).sum(axis=1),
        relative_error=rel,
        exact_zero=zero,
    )


def lift_report_rows(report: LiftReport):
    """CSV rows (iter, residual, drift, seconds) for a lift report."""
    rows = []
    for i, r in enumerate(report.residual_history, start=1):
        rows.append((i, r, report.conserved_drift, report.wall_time))
    return rows
