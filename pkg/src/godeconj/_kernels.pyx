# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled versions of the hot loops in ``_fallback``.

Each routine has the same signature and semantics as its numpy twin.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void _matmul(double[:, ::1] A, double[:, ::1] B, double[:, ::1] out,
                         Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef double acc
    for i in range(d):
        for j in range(d):
            acc = 0.0
            for k in range(d):
                acc = acc + A[i, k] * B[k, j]
            out[i, j] = acc


def rk4_products(D0, Dm, D1, hs, seg_ptr):
    cdef double[:, :, ::1] a0 = np.ascontiguousarray(D0, dtype=np.float64)
    cdef double[:, :, ::1] am = np.ascontiguousarray(Dm, dtype=np.float64)
    cdef double[:, :, ::1] a1 = np.ascontiguousarray(D1, dtype=np.float64)
    cdef double[::1] hv = np.ascontiguousarray(hs, dtype=np.float64)
    cdef long long[::1] ptr = np.ascontiguousarray(seg_ptr, dtype=np.int64)
    cdef Py_ssize_t d = a0.shape[1]
    cdef Py_ssize_t nseg = ptr.shape[0] - 1
    out_arr = np.empty((nseg, d, d))
    cdef double[:, :, ::1] out = out_arr
    cdef double[:, ::1] k1 = np.empty((d, d))
    cdef double[:, ::1] k2 = np.empty((d, d))
    cdef double[:, ::1] k3 = np.empty((d, d))
    cdef double[:, ::1] k4 = np.empty((d, d))
    cdef double[:, ::1] tmp = np.empty((d, d))
    cdef double[:, ::1] step = np.empty((d, d))
    cdef double[:, ::1] acc = np.empty((d, d))
    cdef double[:, ::1] nxt = np.empty((d, d))
    cdef Py_ssize_t m, s, i, j
    cdef double h
    with nogil:
        for m in range(nseg):
            for i in range(d):
                for j in range(d):
                    acc[i, j] = 1.0 if i == j else 0.0
            for s in range(ptr[m], ptr[m + 1]):
                h = hv[s]
                for i in range(d):
                    for j in range(d):
                        k1[i, j] = a0[s, i, j]
                _matmul(am[s], k1, tmp, d)
                for i in range(d):
                    for j in range(d):
                        k2[i, j] = am[s, i, j] + 0.5 * h * tmp[i, j]
                _matmul(am[s], k2, tmp, d)
                for i in range(d):
                    for j in range(d):
                        k3[i, j] = am[s, i, j] + 0.5 * h * tmp[i, j]
                _matmul(a1[s], k3, tmp, d)
                for i in range(d):
                    for j in range(d):
                        k4[i, j] = a1[s, i, j] + h * tmp[i, j]
                        step[i, j] = (1.0 if i == j else 0.0) + h / 6.0 * (
                            k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
                _matmul(step, acc, nxt, d)
                for i in range(d):
                    for j in range(d):
                        acc[i, j] = nxt[i, j]
            for i in range(d):
                for j in range(d):
                    out[m, i, j] = acc[i, j]
    return out_arr


def projected_scans(Phi, Phi_inv, P, incr):
    cdef double[:, :, ::1] phi = np.ascontiguousarray(Phi, dtype=np.float64)
    cdef double[:, :, ::1] phinv = np.ascontiguousarray(Phi_inv, dtype=np.float64)
    cdef double[:, :, ::1] proj = np.ascontiguousarray(P, dtype=np.float64)
    cdef double[:, :, ::1] inc = np.ascontiguousarray(incr, dtype=np.float64)
    cdef Py_ssize_t B = inc.shape[0]
    cdef Py_ssize_t N = inc.shape[1]
    cdef Py_ssize_t d = inc.shape[2]
    S_arr = np.zeros((B, N + 1, d))
    U_arr = np.zeros((B, N + 1, d))
    cdef double[:, :, ::1] S = S_arr
    cdef double[:, :, ::1] U = U_arr
    cdef double[::1] w = np.empty(d)
    cdef double[::1] v = np.empty(d)
    cdef Py_ssize_t b, k, i, j
    cdef double acc
    with nogil:
        for b in range(B):
            for k in range(N):
                for i in range(d):
                    acc = inc[b, k, i]
                    for j in range(d):
                        acc = acc + phi[k, i, j] * S[b, k, j]
                    w[i] = acc
                for i in range(d):
                    acc = 0.0
                    for j in range(d):
                        acc = acc + proj[k + 1, i, j] * w[j]
                    S[b, k + 1, i] = acc
            for k in range(N - 1, -1, -1):
                for i in range(d):
                    w[i] = U[b, k + 1, i] + inc[b, k, i]
                for i in range(d):
                    acc = 0.0
                    for j in range(d):
                        acc = acc + phinv[k, i, j] * w[j]
                    v[i] = acc
                for i in range(d):
                    acc = v[i]
                    for j in range(d):
                        acc = acc - proj[k, i, j] * v[j]
                    U[b, k, i] = acc
    return S_arr, U_arr


def linear_scan(Phi, Phi_inv, C, start, x0):
    cdef double[:, :, ::1] phi = np.ascontiguousarray(Phi, dtype=np.float64)
    cdef double[:, :, ::1] phinv = np.ascontiguousarray(Phi_inv, dtype=np.float64)
    cdef double[:, :, ::1] c = np.ascontiguousarray(C, dtype=np.float64)
    cdef long long[::1] st = np.ascontiguousarray(start, dtype=np.int64)
    cdef double[:, ::1] x0v = np.ascontiguousarray(x0, dtype=np.float64)
    cdef Py_ssize_t B = c.shape[0]
    cdef Py_ssize_t N = c.shape[1]
    cdef Py_ssize_t d = c.shape[2]
    X_arr = np.zeros((B, N + 1, d))
    cdef double[:, :, ::1] X = X_arr
    cdef double[::1] w = np.empty(d)
    cdef Py_ssize_t b, k, i, j, k0
    cdef double acc
    with nogil:
        for b in range(B):
            k0 = st[b]
            for i in range(d):
                X[b, k0, i] = x0v[b, i]
            for k in range(k0, N):
                for i in range(d):
                    acc = c[b, k, i]
                    for j in range(d):
                        acc = acc + phi[k, i, j] * X[b, k, j]
                    X[b, k + 1, i] = acc
            for k in range(k0 - 1, -1, -1):
                for i in range(d):
                    w[i] = X[b, k + 1, i] - c[b, k, i]
                for i in range(d):
                    acc = 0.0
                    for j in range(d):
                        acc = acc + phinv[k, i, j] * w[j]
                    X[b, k, i] = acc
    return X_arr
