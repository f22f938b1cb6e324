# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Signatures mirror ``_fallback``."""

from libc.math cimport exp

import numpy as np


def duhamel_scan(const double complex[:, :, :, ::1] src,
                 const double[::1] ksq,
                 const double[::1] t_nodes,
                 const double[:, ::1] tau,
                 const double[:, ::1] weights,
                 double complex[:, ::1] carry,
                 double t_prev):
    """Accumulate exp(-|k|^2 (t_j - tau)) weighted sources node by node.

    ``src`` has layout (J, Q, C, P); ``carry`` (C, P) holds the running
    integral at ``t_prev`` and is updated in place.  Returns (J, C, P).
    """
    cdef Py_ssize_t J = src.shape[0], Q = src.shape[1]
    cdef Py_ssize_t C = src.shape[2], P = src.shape[3]
    cdef Py_ssize_t j, q, c, p
    cdef double tj, decay, lam
    cdef double complex acc
    out_arr = np.empty((J, C, P), dtype=np.complex128)
    cdef double complex[:, :, ::1] out = out_arr
    cdef double[::1] fac = np.empty(Q, dtype=np.float64)

    with nogil:
        for j in range(J):
            tj = t_nodes[j]
            for p in range(P):
                lam = ksq[p]
                decay = exp(-lam * (tj - t_prev))
                for q in range(Q):
                    fac[q] = weights[j, q] * exp(-lam * (tj - tau[j, q]))
                for c in range(C):
                    acc = carry[c, p] * decay
                    for q in range(Q):
                        acc = acc + fac[q] * src[j, q, c, p]
                    out[j, c, p] = acc
                    carry[c, p] = acc
            t_prev = tj
    return out_arr


def cubic_form(const double[:, :, ::1] coef, const double[::1] g):
    """out_k = sum_ij coef[i, j, k] g_i g_j."""
    cdef Py_ssize_t n = g.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double gi, gij
    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(n):
            gi = g[i]
            if gi == 0.0:
                continue
            for j in range(n):
                gij = gi * g[j]
                if gij == 0.0:
                    continue
                for k in range(n):
                    out[k] += coef[i, j, k] * gij
    return out_arr
