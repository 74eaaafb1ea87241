"""Sparse assembly and the two solver paths (SPD and saddle point)."""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse import linalg as spla

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12
MAX_REFINEMENTS = 4


class SolverError(RuntimeError):
    """Raised when a solve misses its residual target or the system is singular."""


@dataclass
class SolveReport:
    """Outcome of a linear solve.

    ``residual`` is ``‖Ax - b‖ / ‖b‖``. ``floor`` bounds the rounding error
    of evaluating that residual in double precision; on badly conditioned
    systems (Morley stiffness at fine levels) it can exceed ``tol``, in
    which case reaching the floor is the best any solver can certify.
    """

    method: str
    iterations: int
    residual: float
    tol: float
    floor: float = 0.0

    @property
    def converged(self):
        return self.residual <= max(self.tol, self.floor)


def assemble(local, dofmap, ndof):
    """Scatter element matrices into a global CSR matrix.

    Parameters
    ----------
    local : (T, k, k) array
        Element matrices.
    dofmap : (T, k) int array
        Global index of each local DOF; negative entries are eliminated.
    ndof : int
    """
    dofmap = np.asarray(dofmap)
    rows = np.broadcast_to(dofmap[:, :, None], local.shape)
    cols = np.broadcast_to(dofmap[:, None, :], local.shape)
    keep = (rows >= 0) & (cols >= 0)
    A = sp.coo_matrix((local[keep], (rows[keep], cols[keep])), shape=(ndof, ndof))
    A = A.tocsr()
    A.sum_duplicates()
    A.eliminate_zeros()
    return A


def assemble_rect(local, row_map, col_map, shape):
    """Rectangular analogue of :func:`assemble` for ``(T, m, k)`` blocks."""
    rows = np.broadcast_to(np.asarray(row_map)[:, :, None], local.shape)
    cols = np.broadcast_to(np.asarray(col_map)[:, None, :], local.shape)
    keep = (rows >= 0) & (cols >= 0)
    B = sp.coo_matrix((local[keep], (rows[keep], cols[keep])), shape=shape).tocsr()
    B.sum_duplicates()
    B.eliminate_zeros()
    return B


def assemble_vector(local, dofmap, ndof):
    dofmap = np.asarray(dofmap)
    keep = dofmap >= 0
    return np.bincount(dofmap[keep], weights=local[keep], minlength=ndof)


def relative_residual(A, x, b):
    bnorm = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return r / bnorm if bnorm > 0 else r


def residual_floor(A, x, b):
    """Rounding bound ``k eps ‖|A||x|‖ / ‖b‖`` for computing ``Ax - b``.

    ``k`` is the largest number of nonzeros in a row.
    """
    A = sp.csr_matrix(A)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0 or A.nnz == 0:
        return 0.0
    k = int(np.diff(A.indptr).max()) + 1
    return k * np.finfo(float).eps * np.linalg.norm(abs(A) @ np.abs(x)) / bnorm


def _refined_solve(solve, A, b, tol):
    """Solve plus iterative refinement; returns the best iterate seen."""
    x = solve(b)
    res = relative_residual(A, x, b)
    steps = 0
    while res > tol and steps < MAX_REFINEMENTS:
        y = x + solve(b - A @ x)
        steps += 1
        r = relative_residual(A, y, b)
        if r >= res:
            break
        x, res = y, r
    return x, steps, res


def _factorize(A):
    try:
        return spla.splu(sp.csc_matrix(A))
    except RuntimeError as exc:  # SuperLU reports exact singularity this way
        raise SolverError(f"singular system: {exc}") from exc


def pcg(A, b, tol=DEFAULT_TOL, maxiter=None):
    """Jacobi-preconditioned conjugate gradients; returns ``(x, iterations)``."""
    n = len(b)
    maxiter = 20 * n if maxiter is None else maxiter
    if not np.any(b):
        return np.zeros(n), 0
    count = [0]

    def tick(_):
        count[0] += 1

    M = sp.diags(1.0 / A.diagonal())
    x, info = spla.cg(A, b, rtol=tol, atol=0.0, maxiter=maxiter, M=M, callback=tick)
    if info != 0:
        raise SolverError(f"CG did not converge in {maxiter} iterations")
    return x, count[0]


def solve_spd(A, b, tol=DEFAULT_TOL, method="direct", maxiter=None):
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    ``method`` is ``"direct"`` (sparse LU plus iterative refinement) or
    ``"cg"``. Either way the relative residual is recomputed and a
    :class:`SolverError` raised if it exceeds ``tol``.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    if method == "direct":
        lu = _factorize(A)
        x, steps, res = _refined_solve(lu.solve, A, b, tol)
        report = SolveReport("direct", steps, res, tol, residual_floor(A, x, b))
    elif method == "cg":
        x, its = pcg(A, b, tol, maxiter)
        report = SolveReport("cg", its, relative_residual(A, x, b), tol,
                             residual_floor(A, x, b))
        if report.residual > tol:
            # the recursive residual can drift from the true one; polish
            x, steps, res = _refined_solve(lambda r: pcg(A, r, tol, maxiter)[0], A, b, tol)
            report = SolveReport("cg", its + steps, res, tol, residual_floor(A, x, b))
    else:
        raise ValueError(f"unknown method {method!r}")
    if not report.converged:
        raise SolverError(f"residual {report.residual:.3e} above tolerance {tol:.1e} "
                          f"(rounding floor {report.floor:.1e})")
    if report.residual > tol:
        log.info("solve_spd: residual %.2e above tol %.1e but within rounding floor %.1e",
                 report.residual, tol, report.floor)
    log.debug("solve_spd: n=%d %s", len(b), report)
    return x, report


def saddle_matrix(A, B):
    """The symmetric indefinite block matrix ``[[A, B^T], [B, 0]]``."""
    return sp.bmat([[A, B.T], [B, None]], format="csc")


def solve_saddle(A, B, f, g, tol=DEFAULT_TOL):
    """Solve ``[[A, B^T], [B, 0]] (sigma, u) = (f, g)``.

    Returns ``(sigma, u, report)``; the report's residual is the relative
    residual of the whole block system.
    """
    A = sp.csr_matrix(A)
    B = sp.csr_matrix(B)
    m, k = B.shape
    if A.shape != (k, k):
        raise ValueError("block shapes do not match")
    if m > k:
        raise SolverError("B has more rows than columns; cannot have full rank")
    K = saddle_matrix(A, B)
    rhs = np.concatenate([np.asarray(f, float), np.asarray(g, float)])
    lu = _factorize(K)
    x, steps, res = _refined_solve(lu.solve, K, rhs, tol)
    if not np.all(np.isfinite(x)):
        raise SolverError("saddle system is singular (rank-deficient constraint)")
    report = SolveReport("direct-saddle", steps, res, tol, residual_floor(K, x, rhs))
    if not report.converged:
        raise SolverError(f"saddle residual {res:.3e} above tolerance {tol:.1e}")
    return x[:k], x[k:], report
