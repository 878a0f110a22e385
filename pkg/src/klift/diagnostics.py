"""Spectral and convergence diagnostics for the projectors and the CR map.

Full spectra use a dense eigensolve and are capped in dimension; for larger
cases a matrix-free Arnoldi estimate of the spectral radius is available.
The CR-map Jacobian is assembled column by column from forward differences,
which is embarrassingly parallel across columns.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigs

from .cr import CRConfig, cr_map
from .moments import MomentBasis, naive_projector, unconserved_basis

DENSE_SPECTRUM_CAP = 2000
PROJECTOR_DIM_CAP = 512


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray  # complex
    spectral_radius: float
    operator: str
    params: dict = field(default_factory=dict)


def _report(eigenvalues: np.ndarray, operator: str, params: dict) -> SpectrumReport:
    return SpectrumReport(
        eigenvalues=eigenvalues,
        spectral_radius=float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0,
        operator=operator,
        params=params,
    )


def projector_spectrum(basis: MomentBasis, which: str = "qr") -> SpectrumReport:
    """Eigenvalues of the materialized q x q projector.

    which = "qr": I - Q Q^T (expected spectrum {0 x k, 1 x (q-k)});
    which = "naive": I - M^{-1} M0, whose spectrum degrades with cond(M).
    """
    q = basis.q
    if q > PROJECTOR_DIM_CAP:
        raise ValueError(f"dense projector spectrum capped at q={PROJECTOR_DIM_CAP}")
    params = {"q": q, "k": basis.k, "kind": basis.kind.value}
    if which == "qr":
        P = np.eye(q) - basis.Q @ basis.Q.T
        # symmetric: real spectrum
        ev = np.linalg.eigvalsh(P).astype(complex)
        return _report(ev, "qr-projector", params)
    if which == "naive":
        P, cond = naive_projector(basis)
        ev = np.linalg.eigvals(P)
        params["cond_1"] = cond
        return _report(ev, "naive-projector", params)
    raise ValueError("which must be 'qr' or 'naive'")


def _jacobian_columns(apply_map, base_out, f0, U, eps, threads):
    """Forward-difference Jacobian of the CR map in unconserved coordinates."""
    n_cells, q = f0.shape
    r = U.shape[1]
    dim = n_cells * r
    fnorm = float(np.linalg.norm(f0))
    h = eps * (1.0 + fnorm)

    def column(idx):
        j, l = divmod(idx, r)
        pert = f0.copy()
        pert[j] += h * U[:, l]
        out = apply_map(pert)
        return idx, ((out - base_out) @ U).reshape(dim) / h

    J = np.empty((dim, dim))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            for idx, col in ex.map(column, range(dim)):
                J[:, idx] = col
    else:
        for idx in range(dim):
            _, col = column(idx)
            J[:, idx] = col
    return J


def cr_jacobian_matrix(
    stepper,
    basis: MomentBasis,
    f0: np.ndarray,
    cfg: CRConfig,
    *,
    naive_P: np.ndarray | None = None,
    max_dim: int = DENSE_SPECTRUM_CAP,
    threads: int = 1,
) -> np.ndarray:
    """FD-assembled Jacobian of the CR map in unconserved coordinates.

    The state dimension is N (q - k); the dense assembly caps it at
    ``max_dim`` (use spectral_radius_arnoldi beyond that).
    """
    n_cells, q = f0.shape
    U = unconserved_basis(basis)
    dim = n_cells * (q - basis.k)
    if dim > max_dim:
        raise ValueError(
            f"CR Jacobian dimension {dim} exceeds dense cap {max_dim}; "
            "use spectral_radius_arnoldi instead"
        )

    def apply_map(state):
        return cr_map(stepper, basis, f0, state, cfg.order_m, naive_P=naive_P)

    base_out = apply_map(f0)
    eps = cfg.fd_epsilon if cfg.fd_epsilon is not None else math.sqrt(np.finfo(float).eps)
    return _jacobian_columns(apply_map, base_out, f0, U, eps, threads)


def cr_jacobian_spectrum(
    stepper,
    basis: MomentBasis,
    f0: np.ndarray,
    cfg: CRConfig,
    *,
    naive_P: np.ndarray | None = None,
    max_dim: int = DENSE_SPECTRUM_CAP,
    threads: int = 1,
    params: dict | None = None,
) -> SpectrumReport:
    """Dense nonsymmetric spectrum of d C_m / d s around f0."""
    n_cells, q = f0.shape
    J = cr_jacobian_matrix(
        stepper, basis, f0, cfg, naive_P=naive_P, max_dim=max_dim, threads=threads
    )
    ev = np.linalg.eigvals(J)
    p = {"N": n_cells, "q": q, "k": basis.k, "m": cfg.order_m,
         "projector": "naive" if naive_P is not None else "qr"}
    if params:
        p.update(params)
    return _report(ev, "cr-jacobian", p)


def spectral_radius_arnoldi(
    stepper,
    basis: MomentBasis,
    f0: np.ndarray,
    cfg: CRConfig,
    *,
    naive_P: np.ndarray | None = None,
    tol: float = 1e-6,
) -> float:
    """Matrix-free dominant-eigenvalue estimate of |d C_m / d s|.

    Radius-only mode for configurations too large for the dense path.
    """
    n_cells, q = f0.shape
    U = unconserved_basis(basis)
    r = U.shape[1]
    dim = n_cells * r

    def apply_map(state):
        return cr_map(stepper, basis, f0, state, cfg.order_m, naive_P=naive_P)

    base_out = apply_map(f0)
    eps = cfg.fd_epsilon if cfg.fd_epsilon is not None else math.sqrt(np.finfo(float).eps)
    fnorm = float(np.linalg.norm(f0))

    def matvec(x):
        xn = float(np.linalg.norm(x))
        if xn == 0.0:
            return np.zeros_like(x)
        h = eps * (1.0 + fnorm) / xn
        pert = f0 + h * (x.reshape(n_cells, r) @ U.T)
        out = apply_map(pert)
        return (((out - base_out) @ U) / h).reshape(dim)

    op = LinearOperator((dim, dim), matvec=matvec, dtype=float)
    vals = eigs(op, k=1, which="LM", tol=tol, return_eigenvectors=False)
    return float(np.abs(vals[0]))


def eigenpair_residuals(A: np.ndarray, n_samples: int = 5, seed: int = 0) -> np.ndarray:
    """||A v - lambda v|| / ||v|| for a few sampled eigenpairs (sanity check)."""
    vals, vecs = np.linalg.eig(A)
    rng = np.random.default_rng(seed)
    idx = rng.choice(A.shape[0], size=min(n_samples, A.shape[0]), replace=False)
    res = []
    for i in idx:
        v = vecs[:, i]
        res.append(np.linalg.norm(A @ v - vals[i] * v) / np.linalg.norm(v))
    return np.array(res)
