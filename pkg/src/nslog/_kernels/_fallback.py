"""Pure numpy versions of the compiled kernels (identical signatures)."""

import numpy as np


def duhamel_scan(src, ksq, t_nodes, tau, weights, carry, t_prev):
    J, Q, C, P = src.shape
    out = np.empty((J, C, P), dtype=np.complex128)
    for j in range(J):
        tj = t_nodes[j]
        fac = weights[j][:, None] * np.exp(-np.outer(tj - tau[j], ksq))  # (Q, P)
        carry *= np.exp(-ksq * (tj - t_prev))
        carry += np.einsum("qp,qcp->cp", fac, src[j])
        out[j] = carry
        t_prev = tj
    return out


def cubic_form(coef, g):
    n = g.shape[0]
    tmp = (g @ coef.reshape(n, n * n)).reshape(n, n)
    return g @ tmp
