# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels (same API as ``_pykernels``)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

cdef enum:
    C_CONVERGED = 0
    C_MAXITER = 1
    C_BREAKDOWN = 2

CONVERGED, MAXITER, BREAKDOWN = C_CONVERGED, C_MAXITER, C_BREAKDOWN


def element_matrices(const double[:, :, ::1] dphi, const double[:, ::1] phi,
                     const double[:, :, :, ::1] ginv, const double[:, ::1] wdet):
    cdef Py_ssize_t nq = dphi.shape[0], nb = dphi.shape[1], td = dphi.shape[2]
    cdef Py_ssize_t nc = wdet.shape[0]
    cdef Py_ssize_t npair = nb * (nb + 1) // 2
    cdef Py_ssize_t nab = td * (td + 1) // 2
    cdef Py_ssize_t c, q, i, j, a, b, p, m
    cdef double w, s
    cdef double *ukp
    cdef const double *src
    # symmetric products of reference gradients, shared by all cells:
    # prod[q, ab, p] = d_a phi_i d_b phi_j (+ the swapped term when a != b)
    prod_arr = np.empty((nq, nab, npair))
    pm_arr = np.empty((nq, npair))
    cdef double[:, :, ::1] prod = prod_arr
    cdef double[:, ::1] pm = pm_arr
    for q in range(nq):
        p = 0
        for i in range(nb):
            for j in range(i, nb):
                pm[q, p] = phi[q, i] * phi[q, j]
                m = 0
                for a in range(td):
                    for b in range(a, td):
                        s = dphi[q, i, a] * dphi[q, j, b]
                        if a != b:
                            s = s + dphi[q, i, b] * dphi[q, j, a]
                        prod[q, m, p] = s
                        m += 1
                p += 1
    upper_k = np.zeros((nc, npair))
    upper_m = np.zeros((nc, npair))
    cdef double[:, ::1] uk = upper_k
    cdef double[:, ::1] um = upper_m
    cdef double[::1] coef = np.empty(nab)
    with nogil:
        for c in range(nc):
            for q in range(nq):
                w = wdet[c, q]
                m = 0
                for a in range(td):
                    for b in range(a, td):
                        coef[m] = w * ginv[c, q, a, b]
                        m += 1
                ukp = &uk[c, 0]
                for m in range(nab):
                    s = coef[m]
                    src = &prod[q, m, 0]
                    for p in range(npair):
                        ukp[p] += s * src[p]
                ukp = &um[c, 0]
                src = &pm[q, 0]
                for p in range(npair):
                    ukp[p] += w * src[p]
    iu, ju = np.triu_indices(nb)
    stiff_arr = np.empty((nc, nb, nb))
    mass_arr = np.empty((nc, nb, nb))
    stiff_arr[:, iu, ju] = upper_k
    stiff_arr[:, ju, iu] = upper_k
    mass_arr[:, iu, ju] = upper_m
    mass_arr[:, ju, iu] = upper_m
    return stiff_arr, mass_arr


cdef inline void _matvec(const int[::1] indptr, const int[::1] indices,
                         const double[::1] data, const double[::1] x,
                         double[::1] y) noexcept nogil:
    cdef Py_ssize_t i, jj
    cdef double s
    for i in range(y.shape[0]):
        s = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            s = s + data[jj] * x[indices[jj]]
        y[i] = s


def pcg(indptr_in, indices_in, data_in, b_in, x0, double rtol, Py_ssize_t maxiter):
    cdef const int[::1] indptr = np.ascontiguousarray(indptr_in, dtype=np.int32)
    cdef const int[::1] indices = np.ascontiguousarray(indices_in, dtype=np.int32)
    cdef const double[::1] data = np.ascontiguousarray(data_in, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(b_in, dtype=np.float64)
    cdef Py_ssize_t n = b.shape[0]
    cdef Py_ssize_t i, jj, it
    x_arr = np.array(x0, dtype=np.float64, copy=True)
    cdef double[::1] x = x_arr
    cdef double[::1] r = np.empty(n)
    cdef double[::1] z = np.empty(n)
    cdef double[::1] p = np.empty(n)
    cdef double[::1] ap = np.empty(n)
    cdef double[::1] dinv = np.empty(n)
    hist_arr = np.zeros(maxiter)
    cdef double[::1] hist = hist_arr
    cdef double bnorm = 0.0, rnorm, rz, rz_new, pap, alpha, beta, d
    cdef int status = C_MAXITER
    cdef Py_ssize_t done = maxiter

    for i in range(n):
        d = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            if indices[jj] == i:
                d = d + data[jj]
        if d <= 0.0:
            return x_arr, 0, np.zeros(0), BREAKDOWN
        dinv[i] = 1.0 / d
        bnorm += b[i] * b[i]
    bnorm = sqrt(bnorm)
    if bnorm == 0.0:
        return np.zeros(n), 0, np.zeros(0), CONVERGED

    with nogil:
        _matvec(indptr, indices, data, x, ap)
        rz = 0.0
        rnorm = 0.0
        for i in range(n):
            r[i] = b[i] - ap[i]
            z[i] = dinv[i] * r[i]
            p[i] = z[i]
            rz += r[i] * z[i]
            rnorm += r[i] * r[i]
        if sqrt(rnorm) <= rtol * bnorm:
            status = C_CONVERGED
            done = 0
        else:
            for it in range(1, maxiter + 1):
                _matvec(indptr, indices, data, p, ap)
                pap = 0.0
                for i in range(n):
                    pap += p[i] * ap[i]
                if pap <= 0.0:
                    status = C_BREAKDOWN
                    done = it
                    break
                alpha = rz / pap
                rz_new = 0.0
                rnorm = 0.0
                for i in range(n):
                    x[i] += alpha * p[i]
                    r[i] -= alpha * ap[i]
                    z[i] = dinv[i] * r[i]
                    rz_new += r[i] * z[i]
                    rnorm += r[i] * r[i]
                hist[it - 1] = sqrt(rz_new) if rz_new > 0.0 else 0.0
                if sqrt(rnorm) <= rtol * bnorm:
                    status = C_CONVERGED
                    done = it
                    break
                beta = rz_new / rz
                for i in range(n):
                    p[i] = z[i] + beta * p[i]
                rz = rz_new
    nhist = done - 1 if status == C_BREAKDOWN else done
    return x_arr, done, hist_arr[:nhist].copy(), status
