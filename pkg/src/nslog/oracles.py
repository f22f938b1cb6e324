"""Brute-force reference computations, independent of the production paths."""

import numpy as np

from .spectral import leray_coeffs, product_coeffs, tensor_divergence_coeffs, ifft

__all__ = ["brute_duhamel", "dense_xr"]


def brute_duhamel(u0, v0, t, J=4096, order=4):
    """B(u, v)(t) for heat-flow paths, uniform mesh, no interpolation.

    Every quadrature point gets its own exact heat flow of the data, and the
    semigroup factor is applied to each point directly.
    """
    g = u0.grid
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, t, J + 1)
    h = np.diff(edges)
    tau = (edges[:-1, None] + 0.5 * h[:, None] * (x + 1)).ravel()
    wt = (0.5 * h[:, None] * w).ravel()
    acc = np.zeros((g.dim,) + g.shape, dtype=complex)
    for a in range(0, tau.size, 512):
        ts = tau[a:a + 512]
        heat = np.exp(-np.multiply.outer(ts, g.ksq))[:, None]
        up = ifft(g, u0.coeffs[None] * heat)
        vp = ifft(g, v0.coeffs[None] * heat)
        D = tensor_divergence_coeffs(g, product_coeffs(g, up, vp))
        decay = np.exp(-np.multiply.outer(t - ts, g.ksq))[:, None]
        acc += np.sum(wt[a:a + 512, None, None, None] * decay * D, axis=0)
    return leray_coeffs(g, acc)


def dense_xr(values, r):
    """Largest singular value of the dense multiply-then-smooth matrix on a 2D grid."""
    M = values.shape[0]
    n = M * M
    k = np.fft.fftfreq(M, 1.0 / M)
    ksq = (k[:, None] ** 2 + k[None, :] ** 2).ravel()
    F = np.fft.fft2(np.eye(n).reshape(n, M, M), norm="ortho").reshape(n, n).T
    smooth = F.conj().T @ np.diag((1 + ksq) ** (-r / 2)) @ F
    A = np.diag(np.abs(values).ravel()) @ smooth
    return np.linalg.svd(A.real, compute_uv=False)[0]
