"""Pure-numpy implementations of the hot loops.

These mirror the compiled routines in ``_kernels.pyx`` one for one and are
used whenever the extension is unavailable or ``GODECONJ_PURE=1`` is set.
"""
from __future__ import annotations

import numpy as np


def rk4_products(D0, Dm, D1, hs, seg_ptr):
    """Products of classical RK4 step matrices for ``V' = D(t) V``.

    Parameters
    ----------
    D0, Dm, D1 : ndarray, shape (S, d, d)
        Density at the start, midpoint and end of each substep.
    hs : ndarray, shape (S,)
        Substep lengths.
    seg_ptr : ndarray of int, shape (M + 1,)
        Substeps ``seg_ptr[m]:seg_ptr[m + 1]`` form segment ``m``.

    Returns
    -------
    ndarray, shape (M, d, d)
        For each segment the ordered product ``M_last ... M_first``.
    """
    D0 = np.asarray(D0, dtype=float)
    Dm = np.asarray(Dm, dtype=float)
    D1 = np.asarray(D1, dtype=float)
    hs = np.asarray(hs, dtype=float)
    d = D0.shape[-1]
    eye = np.eye(d)
    h = hs[:, None, None]
    k1 = D0
    k2 = Dm + 0.5 * h * (Dm @ k1)
    k3 = Dm + 0.5 * h * (Dm @ k2)
    k4 = D1 + h * (D1 @ k3)
    steps = eye + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    nseg = len(seg_ptr) - 1
    out = np.empty((nseg, d, d))
    for m in range(nseg):
        acc = eye.copy()
        for s in range(seg_ptr[m], seg_ptr[m + 1]):
            acc = steps[s] @ acc
        out[m] = acc
    return out


def projected_scans(Phi, Phi_inv, P, incr):
    """Forward stable scan and backward unstable scan.

    ``S[0] = 0``, ``S[k+1] = P[k+1] (Phi[k] S[k] + incr[k])`` and
    ``U[N] = 0``, ``U[k] = (I - P[k]) Phi_inv[k] (U[k+1] + incr[k])``, for
    every batch member of ``incr`` (shape ``(B, N, d)``).
    """
    incr = np.asarray(incr, dtype=float)
    B, N, d = incr.shape
    eye = np.eye(d)
    S = np.zeros((B, N + 1, d))
    U = np.zeros((B, N + 1, d))
    for k in range(N):
        S[:, k + 1] = (S[:, k] @ Phi[k].T + incr[:, k]) @ P[k + 1].T
    for k in range(N - 1, -1, -1):
        U[:, k] = (U[:, k + 1] + incr[:, k]) @ Phi_inv[k].T @ (eye - P[k]).T
    return S, U


def linear_scan(Phi, Phi_inv, C, start, x0):
    """Solve ``X[k+1] = Phi[k] X[k] + C[k]`` from ``X[start] = x0``.

    The recursion runs forward from ``start`` and backward (through the
    inverse) towards index 0, independently for every batch member.
    """
    C = np.asarray(C, dtype=float)
    B, N, d = C.shape
    start = np.asarray(start, dtype=np.int64)
    X = np.zeros((B, N + 1, d))
    X[np.arange(B), start] = x0
    for k in range(N):
        fwd = start <= k
        if np.any(fwd):
            X[fwd, k + 1] = X[fwd, k] @ Phi[k].T + C[fwd, k]
    for k in range(N - 1, -1, -1):
        bwd = start > k
        if np.any(bwd):
            X[bwd, k] = (X[bwd, k + 1] - C[bwd, k]) @ Phi_inv[k].T
    return X
