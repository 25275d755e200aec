"""Pure NumPy implementations of the hot kernels.

These define the reference semantics; the compiled module mirrors them.
"""

import numpy as np

CONVERGED, MAXITER, BREAKDOWN = 0, 1, 2


def element_matrices(dphi, phi, ginv, wdet):
    """Local stiffness and mass matrices for a batch of cells.

    ``K_ij = sum_q wdet ginv(grad phi_i, grad phi_j)`` and
    ``M_ij = sum_q wdet phi_i phi_j``.

    Parameters
    ----------
    dphi : (nq, nb, td) reference gradients
    phi : (nq, nb) basis values
    ginv : (nc, nq, td, td) inverse metric tensors
    wdet : (nc, nq) quadrature weights times area elements
    """
    nq, nb, td = dphi.shape
    nc = wdet.shape[0]
    outer = np.einsum("qia,qjb->qabij", dphi, dphi).reshape(nq * td * td, nb * nb)
    weighted = (wdet[:, :, None, None] * ginv).reshape(nc, nq * td * td)
    stiff = (weighted @ outer).reshape(nc, nb, nb)
    mass = (wdet @ np.einsum("qi,qj->qij", phi, phi).reshape(nq, nb * nb)).reshape(nc, nb, nb)
    return stiff, mass


def pcg(indptr, indices, data, b, x0, rtol, maxiter):
    """Jacobi-preconditioned conjugate gradients on a CSR matrix.

    Returns ``(x, iterations, history, status)`` where ``history`` holds the
    preconditioned residual norms ``sqrt(r . D^-1 r)`` after each iteration
    and ``status`` is one of CONVERGED, MAXITER, BREAKDOWN.
    """
    from scipy.sparse import csr_matrix

    n = len(b)
    a = csr_matrix((data, indices, indptr), shape=(n, n))
    diag = a.diagonal()
    if np.any(diag <= 0):
        return x0.copy(), 0, np.zeros(0), BREAKDOWN
    dinv = 1.0 / diag
    x = x0.astype(float, copy=True)
    r = b - a @ x
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0, np.zeros(0), CONVERGED
    z = dinv * r
    p = z.copy()
    rz = r @ z
    history = []
    if np.linalg.norm(r) <= rtol * bnorm:
        return x, 0, np.zeros(0), CONVERGED
    for it in range(1, maxiter + 1):
        ap = a @ p
        pap = p @ ap
        if pap <= 0.0:
            return x, it, np.array(history), BREAKDOWN
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        z = dinv * r
        rz_new = r @ z
        history.append(np.sqrt(max(rz_new, 0.0)))
        if np.linalg.norm(r) <= rtol * bnorm:
            return x, it, np.array(history), CONVERGED
        p *= rz_new / rz
        p += z
        rz = rz_new
    return x, maxiter, np.array(history), MAXITER
