"""Jacobi-preconditioned conjugate gradients for the assembled systems."""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import IndefiniteBreakdown, MaxIterations

__all__ = ["SolveReport", "solve_cg"]


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    tolerance: float = 0.0
    history: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)


FLOOR_FACTOR = 8.0


def _rounding_floor(mat, x, bnorm):
    # residual level at which rounding of x and of A x dominates
    eps = np.finfo(float).eps
    return FLOOR_FACTOR * eps * np.linalg.norm(abs(mat) @ np.abs(x)) / bnorm


def solve_cg(system, rel_tol=1e-12, max_iter=None, x0=None, check=True):
    """Solve ``A x = b`` with Jacobi-preconditioned CG.

    Parameters
    ----------
    system : LinearSystem or tuple (matrix, rhs)
    rel_tol : float
        Target for the true relative residual ``|b - Ax| / |b|``.  When this
        is below what double precision can represent for the computed
        solution (about ``eps |A| |x| / |b|``), that rounding floor is used
        instead and recorded in ``SolveReport.tolerance``.
    max_iter : int, optional
        Defaults to ``20 * n``.
    check : bool
        Raise :class:`MaxIterations` when the tolerance is not met.

    Returns
    -------
    x, SolveReport
    """
    if not 0 < rel_tol < 1:
        raise ValueError("rel_tol must lie in (0, 1)")
    if isinstance(system, tuple):
        mat, rhs = system
    else:
        mat, rhs = system.matrix, system.rhs
    mat = sp.csr_matrix(mat)
    mat.sort_indices()
    rhs = np.asarray(rhs, dtype=float)
    n = len(rhs)
    max_iter = 20 * n if max_iter is None else int(max_iter)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True, rel_tol)

    total = 0
    hist = []
    # the recursive residual drifts from the true one, so iterate to a
    # slightly tighter target and restart from the true residual if needed
    inner_tol = 0.1 * rel_tol
    for _ in range(4):
        x, its, h, status = _kernels.pcg(
            mat.indptr, mat.indices, mat.data, rhs, x, inner_tol, max_iter - total
        )
        total += its
        hist.append(h)
        if status == _kernels.BREAKDOWN:
            raise IndefiniteBreakdown(f"p^T A p <= 0 after {total} iterations")
        res = np.linalg.norm(rhs - mat @ x) / bnorm
        tol = max(rel_tol, _rounding_floor(mat, x, bnorm))
        if res <= tol or status == _kernels.MAXITER or total >= max_iter:
            break
    converged = res <= tol
    report = SolveReport(total, float(res), bool(converged), float(tol), np.concatenate(hist))
    if check and not converged:
        raise MaxIterations(f"CG stopped after {total} iterations at residual {res:.3e}")
    return x, report
