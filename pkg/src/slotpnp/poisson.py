"""Zero-mean periodic Poisson solves: -κ Δ_h ψ = rhs.

The periodic operator annihilates constants, so the problem is solvable only
for (numerically) zero-mean right-hand sides and is made unique by the gauge
mean(ψ) = 0.  A rhs mean within ``compat_tol`` times its max norm is treated
as floating-point drift of a conserved charge and silently projected out;
anything larger raises :class:`IncompatibleRhsError`.

The normative solver is conjugate gradients restricted to the zero-mean
subspace (rhs and every iterate are projected).  The operator's diagonal is
the constant 2 dim κ / h², so Jacobi preconditioning is a pure rescaling and
is omitted.  A trigonometric-transform fast path (``backend="fft"``) is
available as an optional alternative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import backend as kernels
from .errors import IncompatibleRhsError, NonConvergenceError
from .grid import CellField, check_same_grid, inner, laplacian

__all__ = ["PoissonProblem", "solve_poisson", "poisson_residual", "COMPAT_TOL"]

COMPAT_TOL = 1e-10
DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class PoissonProblem:
    """Dimensionless permittivity coefficient κ > 0 and total charge density."""

    kappa: float
    rhs: CellField

    def __post_init__(self):
        if not self.kappa > 0.0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")


class SolveStats(NamedTuple):
    iterations: int
    relative_residual: float


def _project_zero_mean(v: np.ndarray) -> np.ndarray:
    return v - v.mean()


def pcg(matvec, b: np.ndarray, tol: float, maxiter: int, diag: np.ndarray | None = None,
        x0: np.ndarray | None = None, project: bool = False, what: str = "pcg"):
    """Preconditioned CG on raw arrays; returns (x, iterations, relative residual).

    ``project=True`` restricts the iteration to the zero-mean subspace.
    Raises :class:`NonConvergenceError` at the iteration cap.
    """
    if project:
        b = _project_zero_mean(b)
    b_norm = math.sqrt(float(np.dot(b.ravel(), b.ravel())))
    if b_norm == 0.0:
        return np.zeros_like(b), 0, 0.0
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    if project:
        x = _project_zero_mean(x)
    r = b - matvec(x)
    if project:
        r = _project_zero_mean(r)
    rel = math.sqrt(float(np.dot(r.ravel(), r.ravel()))) / b_norm
    if rel <= tol:
        return x, 0, rel
    z = r / diag if diag is not None else r
    p = z.copy()
    rz = float(np.dot(r.ravel(), z.ravel()))
    for k in range(1, maxiter + 1):
        ap = matvec(p)
        if project:
            ap = _project_zero_mean(ap)
        alpha = rz / float(np.dot(p.ravel(), ap.ravel()))
        x = x + alpha * p
        r = r - alpha * ap
        if project:
            r = _project_zero_mean(r)
        rel = math.sqrt(float(np.dot(r.ravel(), r.ravel()))) / b_norm
        if rel <= tol:
            return x, k, rel
        z = r / diag if diag is not None else r
        rz_next = float(np.dot(r.ravel(), z.ravel()))
        p = z + (rz_next / rz) * p
        rz = rz_next
    raise NonConvergenceError(what, maxiter, rel, tol)


def _check_compatibility(rhs: CellField, compat_tol: float) -> float:
    vals = rhs.values
    m = float(vals.mean())
    sup = float(np.max(np.abs(vals)))
    limit = compat_tol * sup
    if abs(m) > limit:
        raise IncompatibleRhsError(m, limit)
    return m


def _fft_solve(rhs: np.ndarray, kappa: float, h: float) -> np.ndarray:
    n = rhs.shape[0]
    lam_axis = (4.0 / (h * h)) * np.sin(np.pi * np.arange(n) / n) ** 2
    lam = np.zeros(rhs.shape)
    for ax in range(rhs.ndim):
        shape = [1] * rhs.ndim
        shape[ax] = n
        lam = lam + lam_axis.reshape(shape)
    lam.flat[0] = 1.0  # zero mode removed below
    psi_hat = np.fft.fftn(rhs) / (kappa * lam)
    psi_hat.flat[0] = 0.0
    return np.fft.ifftn(psi_hat).real


def solve_poisson_with_stats(problem: PoissonProblem, tol: float = DEFAULT_TOL,
                             maxiter: int | None = None, x0: CellField | None = None,
                             compat_tol: float = COMPAT_TOL,
                             solver: str = "cg") -> tuple[CellField, SolveStats]:
    """As :func:`solve_poisson`, additionally returning iteration statistics."""
    spec = problem.rhs.spec
    m = _check_compatibility(problem.rhs, compat_tol)
    rhs = problem.rhs.values - m
    if not np.any(rhs):
        return CellField.zeros(spec), SolveStats(0, 0.0)
    h = spec.h
    if solver == "fft":
        psi = _fft_solve(rhs, problem.kappa, h)
        psi = _project_zero_mean(psi)
        res = _residual_values(psi, problem.kappa, rhs, h)
        return CellField(spec, psi), SolveStats(0, res)
    if solver != "cg":
        raise ValueError(f"unknown Poisson solver '{solver}' (expected 'cg' or 'fft')")
    if maxiter is None:
        maxiter = 10 * spec.num_cells
    kappa = problem.kappa

    def matvec(v: np.ndarray) -> np.ndarray:
        return kappa * kernels.neg_laplacian(v, h)

    psi, iters, rel = pcg(matvec, rhs, tol, maxiter,
                          x0=None if x0 is None else x0.values,
                          project=True, what="poisson")
    psi = _project_zero_mean(psi)
    return CellField(spec, psi), SolveStats(iters, rel)


def solve_poisson(problem: PoissonProblem, tol: float = DEFAULT_TOL,
                  maxiter: int | None = None, x0: CellField | None = None,
                  compat_tol: float = COMPAT_TOL, solver: str = "cg") -> CellField:
    """Solve -κ Δ_h ψ = rhs with mean(ψ) = 0 and relative residual <= tol."""
    psi, _ = solve_poisson_with_stats(problem, tol, maxiter, x0, compat_tol, solver)
    return psi


def _residual_values(psi: np.ndarray, kappa: float, rhs: np.ndarray, h: float) -> float:
    r = rhs - kappa * kernels.neg_laplacian(psi, h)
    b_norm = math.sqrt(float(np.dot(rhs.ravel(), rhs.ravel())))
    r_norm = math.sqrt(float(np.dot(r.ravel(), r.ravel())))
    return r_norm / b_norm if b_norm > 0 else r_norm


def poisson_residual(psi: CellField, problem: PoissonProblem) -> float:
    """Grid l2 norm of κ Δ_h ψ + rhs."""
    check_same_grid(psi, problem.rhs)
    r = problem.kappa * laplacian(psi) + problem.rhs
    return math.sqrt(inner(r, r))
