"""Empirical constants for the a-priori estimates.

Each function draws a reproducible battery of inputs, evaluates both sides
of an inequality and returns per-sample ratios together with plain rows
``(t, lhs, rhs, ratio)`` for CSV output.
"""

import math

import numpy as np

from .duhamel import _lq_time, bilinear_B, heat_path, path_weighted
from .spaces import BaseSpace, BesovIndex, LINF, LogMesh, base_norms, besov_norm_heat, log_besov_norm
from .spectral import Field, TensorField, from_physical, ifft, leray_project, pdiv_semigroup, tensor_sup_norm, sup_norm

__all__ = [
    "portable_field",
    "random_tensor",
    "pdiv_scaling",
    "x_space_estimates",
    "drift_space_estimates",
    "heat_lp_band",
    "drift_pairing_constants",
]


def portable_field(grid, kmax=3, seed=0, amplitude=1.0):
    """Divergence-free field on integer modes ``|n_i| <= kmax`` that is identical on every resolution.

    Coefficients are drawn per integer wave vector in a fixed order, so the
    same ``(kmax, seed)`` gives the same continuum field for any ``M``.
    """
    if kmax > grid.kmax_dealias:
        raise ValueError("kmax too large for this grid")
    rng = np.random.default_rng(seed)
    d = grid.dim
    x = grid.x / grid.period
    phys = np.zeros((d,) + grid.shape)
    box = np.array(np.meshgrid(*([np.arange(-kmax, kmax + 1)] * d), indexing="ij")).reshape(d, -1).T
    for n in box:
        a = rng.standard_normal(d)
        b = rng.standard_normal(d)
        phase = np.tensordot(n, x, axes=1)[None]
        shape = (d,) + (1,) * d
        phys += a.reshape(shape) * np.cos(phase) + b.reshape(shape) * np.sin(phase)
    f = leray_project(from_physical(grid, phys))
    c = np.array(f.coeffs)
    c[(slice(None),) + grid.zero_index()] = 0.0
    f = Field(grid, c, True, True)
    return f * (amplitude / sup_norm(f))


def random_tensor(grid, kmax, seed):
    """Band-limited random tensor normalized to unit pointwise-Frobenius sup norm."""
    rng = np.random.default_rng(seed)
    d = grid.dim
    band = (grid.kabs * grid.period <= kmax) & grid.dealias_mask
    phys = rng.standard_normal((d, d) + grid.shape)
    axes = tuple(range(2, 2 + d))
    c = np.fft.fftn(phys, axes=axes, norm="forward") * band
    S = TensorField(grid, c)
    return TensorField(grid, c / tensor_sup_norm(S))


def _mode_tensor(grid, n, a, b):
    d = grid.dim
    phys = np.zeros((d, d) + grid.shape)
    phys[a, b] = np.cos(np.tensordot(np.asarray(n, float), grid.x / grid.period, axes=1))
    c = np.fft.fftn(phys, axes=tuple(range(2, 2 + d)), norm="forward")
    return TensorField(grid, c)


def pdiv_scaling(grid, times, n_random=6, seed=0):
    """``sup_S sqrt(t) ||e^{t Lap} P div S||_inf / ||S||_inf`` per time.

    The battery mixes random band tensors with single-mode tensors along the
    axes and diagonals, so that every frequency scale on the grid is probed.
    """
    K = grid.kmax_dealias
    battery = [random_tensor(grid, K, seed + i) for i in range(n_random)]
    for m in range(1, K + 1):
        for n in ((m,) + (0,) * (grid.dim - 1), (m,) * grid.dim):
            battery.append(_mode_tensor(grid, n, 1, 0))
            battery.append(_mode_tensor(grid, n, 0, 0))
    sizes = [tensor_sup_norm(S) for S in battery]
    rows = []
    for t in times:
        best = max(math.sqrt(t) * sup_norm(pdiv_semigroup(S, t)) / s for S, s in zip(battery, sizes))
        rows.append((float(t), best))
    vals = np.array([r[1] for r in rows])
    return {"rows": rows, "band": float(vals.max() / vals.min())}


def _pairs(grid, tgrid, n_pairs, seed, kmax=3):
    rng = np.random.default_rng(seed)
    for _ in range(n_pairs):
        ku, kv = (int(v) for v in rng.integers(1, kmax + 1, size=2))
        su, sv = (int(v) for v in rng.integers(2**31, size=2))
        yield heat_path(portable_field(grid, ku, su), tgrid), heat_path(portable_field(grid, kv, sv), tgrid)


def _test_fields(grid, count, seed):
    return [portable_field(grid, 2, seed + 1000 + i) for i in range(count)]


def _grad_l1(w):
    g = w.grid
    grad = ifft(g, 1j * g.k[:, None] * w.coeffs[None])
    return float(np.sqrt(np.sum(grad**2, axis=(0, 1))).sum() * g.cell_volume)


def x_space_estimates(grid, tgrid, n_pairs=30, seed=0, n_test=10, sample_nodes=6, mesh_J=80):
    """Ratios for the three conclusions about ``B`` on the logarithmic path space.

    ``x_bound``: ``||B||_X / (||u||_X ||v||_X)``.
    ``log_bound``: ``sup_t ||B(t)||_log / (||u||_X ||v||_X)`` over sampled nodes.
    ``weak_bound``: ``|<B(t), w>| |ln(t/(e^2 T))| / (||u||_X ||v||_X ||grad w||_1)``, whose
    analytic bound is exactly 1; ``vanish`` records whether the pairings decrease
    along the earliest nodes.
    """
    T = tgrid.T
    mesh = LogMesh(T, J=mesh_J)
    tests = _test_fields(grid, n_test, seed)
    tests_l1 = [_grad_l1(w) for w in tests]
    test_phys = [w.physical() for w in tests]
    pick = np.unique(np.geomspace(1, tgrid.J, sample_nodes).astype(int) - 1)
    xb, lb, weak, vanish, rows = [], [], [], [], []
    for u, v in _pairs(grid, tgrid, n_pairs, seed):
        nu = float(path_weighted(u, "x").max())
        nv = float(path_weighted(v, "x").max())
        b = bilinear_B(u, v)
        wb = path_weighted(b, "x")
        xb.append(float(wb.max()) / (nu * nv))
        logs = [log_besov_norm(b[j], LINF, T, mesh=mesh, refine=False).value for j in pick]
        lb.append(max(logs) / (nu * nv))
        bp = b.physical().reshape(len(b), grid.dim, -1)
        t = b.nodes
        Lt = np.abs(np.log(t / T) - 2.0)
        worst, dec = 0.0, True
        for wp, l1 in zip(test_phys, tests_l1):
            pair = np.abs(np.einsum("jap,ap->j", bp, wp.reshape(grid.dim, -1))) * grid.cell_volume
            worst = max(worst, float(np.max(pair * Lt / (nu * nv * l1))))
            dec = dec and bool(pair[0] <= pair[1] * 1.0000001 and pair[1] <= pair[2] * 1.0000001)
        weak.append(worst)
        vanish.append(dec)
        rows.append((T, xb[-1], lb[-1], weak[-1]))
    return {"x_bound": xb, "log_bound": lb, "weak_bound": weak, "vanish": vanish, "rows": rows}


def drift_space_estimates(grid, tgrid, r=0.5, n_pairs=30, seed=0, besov_times=(0.5, 1.0), mesh_J=40, xr_tol=1e-9):
    """Ratios for the four estimates of ``B(u, v) + B(v, u)`` with ``sqrt(t) v`` bounded.

    Each ratio divides the left side by the product named in the estimate:
    ``lq_xr``/``besov`` by ``sup sqrt(t)||v||_inf * ||u||_{L^q X_r}`` and
    ``sup_xr``/``sup_linf`` by ``sup sqrt(t)||v||_inf * sup t^{(1-r)/2} ||u||_{X_r}``.
    ``besov_times`` are fractions of ``T`` at which the Besov norm is sampled.
    """
    T = tgrid.T
    q = 2.0 / (1.0 - r)
    idx = BesovIndex.from_r(r)
    xr = BaseSpace.Xr(r)
    mesh = LogMesh(T, J=mesh_J)
    t = tgrid.nodes
    w = t ** (0.5 * (1.0 - r))
    pick = sorted({int(np.argmin(np.abs(t - f * T))) for f in besov_times})
    out = {k: [] for k in ("lq_xr", "besov", "sup_xr", "sup_linf")}
    rows = []
    for u, v in _pairs(grid, tgrid, n_pairs, seed + 7):
        sv = float(path_weighted(v, "sqrt_linf").max())
        uxr, _ = base_norms(grid, u.coeffs, xr, tol=xr_tol)
        uq = _lq_time(uxr, t, q)
        us = float((w * uxr).max())
        lq = sup_x = sup_l = bes = 0.0
        for b in (bilinear_B(u, v), bilinear_B(v, u)):
            bxr, _ = base_norms(grid, b.coeffs, xr, tol=xr_tol)
            lq += _lq_time(bxr, t, q)
            sup_x += float((w * bxr).max())
            sup_l += float(path_weighted(b, "sqrt_linf").max())
            bes += max(besov_norm_heat(b[j], idx, xr, t0=T, mesh=mesh, refine=False, tol=xr_tol).value for j in pick)
        out["lq_xr"].append(lq / (sv * uq))
        out["besov"].append(bes / (sv * uq))
        out["sup_xr"].append(sup_x / (sv * us))
        out["sup_linf"].append(sup_l / (sv * us))
        rows.append((T,) + tuple(out[k][-1] for k in ("lq_xr", "besov", "sup_xr", "sup_linf")))
    out["rows"] = rows
    return out


def heat_lp_band(grid, idx, E=LINF, n_fields=8, seed=0, kmax=3, **kw):
    """Ratios heat-form / LP-form Besov norm over portable random fields."""
    from .spaces import besov_norm_lp

    ratios = []
    for i in range(n_fields):
        f = portable_field(grid, 1 + i % kmax, seed + i)
        h = besov_norm_heat(f, idx, E, t0=1.0, **kw).value
        lp = besov_norm_lp(f, idx, E, **kw).value
        ratios.append(h / lp)
    return ratios


def drift_pairing_constants(grid, r=0.5, n=20, seed=0, xr_tol=1e-10):
    """Measured constants of the two bounds on ``int u . ((a . grad) u)``.

    ``c_inf = |pair| / (||a||_inf ||u|| ||grad u||)`` is at most 1 by Cauchy-Schwarz;
    ``c_xr = |pair| / (||a||_{X_r} ||u||^{1-r} ||grad u||^{1+r})``.
    """
    from .galerkin import drift_pairing
    from .spectral import l2_norm

    c_inf, c_xr = [], []
    for i in range(n):
        a = portable_field(grid, 1 + i % 3, seed + 2 * i)
        u = portable_field(grid, 1 + (i + 1) % 3, seed + 2 * i + 1)
        pair = abs(drift_pairing(a, u))
        grad = math.sqrt(float(grid.volume * np.sum(grid.ksq * np.abs(u.coeffs) ** 2)))
        un = l2_norm(u)
        c_inf.append(pair / (sup_norm(a) * un * grad))
        axr = float(base_norms(grid, a.coeffs[None], BaseSpace.Xr(r), tol=xr_tol)[0][0])
        c_xr.append(pair / (axr * un ** (1 - r) * grad ** (1 + r)))
    return {"c_inf": c_inf, "c_xr": c_xr}
