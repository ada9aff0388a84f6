# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Per-frequency resolvent projections for a dense complex drift matrix.

D^T is reduced once to Hessenberg form, D^T = Z H Z^H.  For every Omega the
transposed systems (-i Omega - D)^T u = v and (i Omega - D)^T w = v then
become shifted Hessenberg solves, O(n^2) each, with the two projection
vectors as right-hand sides.  Every frequency owns its workspace, so points
may run on any thread.
"""

import numpy as np
from scipy.linalg import hessenberg, matrix_balance
from cython.parallel cimport prange
from libc.stdlib cimport malloc, free
from libc.math cimport fabs

ctypedef double complex cplx


cdef inline double cabs1(cplx z) noexcept nogil:
    return fabs(z.real) + fabs(z.imag)


cdef int _hess_solve(const cplx[:, ::1] H, cplx shift, const cplx[:, ::1] Y0,
                     cplx* A, cplx* X, int n, double amax) noexcept nogil:
    """Solve (shift - H) X = Y0 for upper-Hessenberg H; X is n x 2 row-major."""
    cdef int k, i, j
    cdef cplx tmp, f, piv
    for i in range(n):
        for j in range(n):
            A[i * n + j] = -H[i, j]
        A[i * n + i] = A[i * n + i] + shift
        X[i * 2] = Y0[i, 0]
        X[i * 2 + 1] = Y0[i, 1]
    for k in range(n - 1):
        # only row k+1 is non-zero below the diagonal in column k
        if cabs1(A[(k + 1) * n + k]) > cabs1(A[k * n + k]):
            for j in range(k, n):
                tmp = A[k * n + j]
                A[k * n + j] = A[(k + 1) * n + j]
                A[(k + 1) * n + j] = tmp
            for j in range(2):
                tmp = X[k * 2 + j]
                X[k * 2 + j] = X[(k + 1) * 2 + j]
                X[(k + 1) * 2 + j] = tmp
        piv = A[k * n + k]
        if cabs1(piv) <= 1e-15 * amax:
            return 1
        f = A[(k + 1) * n + k] / piv
        if f.real != 0.0 or f.imag != 0.0:
            for j in range(k + 1, n):
                A[(k + 1) * n + j] = A[(k + 1) * n + j] - f * A[k * n + j]
            X[(k + 1) * 2] = X[(k + 1) * 2] - f * X[k * 2]
            X[(k + 1) * 2 + 1] = X[(k + 1) * 2 + 1] - f * X[k * 2 + 1]
    if cabs1(A[(n - 1) * n + n - 1]) <= 1e-15 * amax:
        return 1
    for k in range(n - 1, -1, -1):
        for j in range(2):
            tmp = X[k * 2 + j]
            for i in range(k + 1, n):
                tmp = tmp - A[k * n + i] * X[i * 2 + j]
            X[k * 2 + j] = tmp / A[k * n + k]
    return 0


cdef int _point(const cplx[:, ::1] H, const cplx[:, ::1] Z, const cplx[:, ::1] Y0,
                const cplx[:, ::1] Diff, double omega, double hmax,
                cplx* out, int n) noexcept nogil:
    cdef cplx* A = <cplx*> malloc(n * n * sizeof(cplx))
    cdef cplx* Y = <cplx*> malloc(n * 2 * sizeof(cplx))
    cdef cplx* U = <cplx*> malloc(n * 2 * sizeof(cplx))
    cdef cplx* W = <cplx*> malloc(n * 2 * sizeof(cplx))
    cdef int i, j, status
    cdef cplx iw = 1j * omega
    cdef double amax = hmax + fabs(omega)
    if A == NULL or Y == NULL or U == NULL or W == NULL:
        free(A); free(Y); free(U); free(W)
        return 2
    status = _hess_solve(H, -iw, Y0, A, Y, n, amax)
    if status == 0:
        _back(Z, Y, U, n)
        status = _hess_solve(H, iw, Y0, A, Y, n, amax)
    if status == 0:
        _back(Z, Y, W, n)
        _project(Diff, U, W, out, n)
    free(A); free(Y); free(U); free(W)
    return status


cdef void _back(const cplx[:, ::1] Z, cplx* Y, cplx* X, int n) noexcept nogil:
    """X = Z Y (two columns)."""
    cdef int i, j
    cdef cplx s0, s1
    for i in range(n):
        s0 = 0
        s1 = 0
        for j in range(n):
            s0 = s0 + Z[i, j] * Y[j * 2]
            s1 = s1 + Z[i, j] * Y[j * 2 + 1]
        X[i * 2] = s0
        X[i * 2 + 1] = s1


cdef void _project(const cplx[:, ::1] Diff, cplx* U, cplx* W, cplx* out, int n) noexcept nogil:
    """out = (u_a^T Diff w_a, u_b^T Diff w_b, u_a^T Diff w_b)."""
    cdef int i, j
    cdef cplx t0, t1
    out[0] = 0
    out[1] = 0
    out[2] = 0
    for i in range(n):
        t0 = 0
        t1 = 0
        for j in range(n):
            t0 = t0 + Diff[i, j] * W[j * 2]
            t1 = t1 + Diff[i, j] * W[j * 2 + 1]
        out[0] = out[0] + U[i * 2] * t0
        out[1] = out[1] + U[i * 2 + 1] * t1
        out[2] = out[2] + U[i * 2] * t1


def sweep_kernel(D, Diff, va, vb, omegas, int num_threads=1):
    """Return (d, status): d[k] = (d_aa, d_bb, d_ab) at omegas[k]; status != 0 marks a singular point."""
    DT = np.asarray(D, dtype=np.complex128).T
    # diagonal balancing D^T = S B S^-1 keeps the reduction accurate for mixed scales
    B, (sc, _perm) = matrix_balance(DT, permute=False, separate=True)
    H_arr, Z_arr = hessenberg(B, calc_q=True)
    # u = S Z (s - H)^-1 Z^H S^-1 v
    Z_arr = sc[:, None] * Z_arr
    V = np.stack([np.asarray(va, dtype=np.complex128), np.asarray(vb, dtype=np.complex128)], axis=1)
    V = V / sc[:, None]
    cdef const cplx[:, ::1] H = np.ascontiguousarray(H_arr)
    cdef const cplx[:, ::1] Z = np.ascontiguousarray(Z_arr)
    cdef const cplx[:, ::1] Y0 = np.ascontiguousarray((Z_arr / sc[:, None]).conj().T @ V)
    cdef const cplx[:, ::1] Df = np.ascontiguousarray(Diff, dtype=np.complex128)
    cdef const double[::1] om = np.ascontiguousarray(omegas, dtype=np.float64)
    cdef double hmax = float(np.max(np.abs(H_arr.real) + np.abs(H_arr.imag)))
    cdef Py_ssize_t m = om.shape[0], k
    cdef int n = H.shape[0]
    out_arr = np.zeros((m, 3), dtype=np.complex128)
    status_arr = np.zeros(m, dtype=np.intc)
    cdef cplx[:, ::1] out = out_arr
    cdef int[::1] status = status_arr
    if num_threads < 1:
        num_threads = 1
    for k in prange(m, nogil=True, num_threads=num_threads, schedule="static"):
        status[k] = _point(H, Z, Y0, Df, om[k], hmax, &out[k, 0], n)
    return out_arr, status_arr
