"""Time machinery: graded meshes, sampled paths, the Duhamel bilinear
operator and the path-space norms.

``B(u, v)(t) = int_0^t exp((t - tau) Laplacian) P div(u(tau) (x) v(tau)) dtau``
is evaluated node by node with Gauss-Legendre points on every subinterval.
Because the semigroup factor is applied with its exact symbol, the integral
at ``t_j`` follows from the one at ``t_{j-1}`` by one decay factor plus the
new subinterval, so a full path costs one sweep over the sources
(:func:`nslog._kernels.duhamel_scan`).
"""

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import integrate

from . import _kernels
from .errors import GridMismatchError
from .fieldio import read_field, write_field
from .spaces import BaseSpace, LogMesh, base_norms, log_weight
from .spectral import (
    Field,
    _check_grid,
    ifft,
    leray_coeffs,
    magnitude,
    product_coeffs,
    tensor_divergence_coeffs,
)

__all__ = [
    "TimeGrid",
    "make_time_grid",
    "PathSample",
    "PathNorms",
    "heat_path",
    "zero_path",
    "bilinear_B",
    "path_norm_X",
    "path_norm_V",
    "path_weighted",
    "logweight_convolution_check",
    "lemma33_operator",
    "bilinear_constant",
]


@dataclass(frozen=True)
class TimeGrid:
    """Nodes ``t_j = T (j/J)**gamma_grade``, ``j = 1..J``, with Gauss points per subinterval."""

    T: float
    J: int = 128
    gamma_grade: float = 2.0
    quad_order: int = 4

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if self.J < 4:
            raise ValueError(f"J must be >= 4, got {self.J}")
        if not self.gamma_grade >= 1:
            raise ValueError(f"gamma_grade must be >= 1, got {self.gamma_grade}")
        if self.quad_order not in range(2, 9):
            raise ValueError(f"quad_order must be in 2..8, got {self.quad_order}")

    @cached_property
    def nodes(self):
        t = self.T * (np.arange(1, self.J + 1) / self.J) ** self.gamma_grade
        t[-1] = self.T
        t.setflags(write=False)
        return t

    @cached_property
    def _quad(self):
        x, w = np.polynomial.legendre.leggauss(self.quad_order)
        left = np.concatenate([[0.0], self.nodes[:-1]])
        h = self.nodes - left
        tau = left[:, None] + 0.5 * h[:, None] * (x[None] + 1.0)
        wt = 0.5 * h[:, None] * w[None]
        return tau, wt

    def quadrature(self):
        """Gauss points and weights, each ``(J, quad_order)``."""
        return self._quad

    def with_horizon(self, T):
        return TimeGrid(float(T), self.J, self.gamma_grade, self.quad_order)

    def to_dict(self):
        return {"T": self.T, "J": self.J, "gamma_grade": self.gamma_grade, "quad_order": self.quad_order}


def make_time_grid(T, J=128, gamma_grade=2.0, quad_order=4):
    return TimeGrid(float(T), int(J), float(gamma_grade), int(quad_order))


class PathSample:
    """Fields at the nodes of a TimeGrid, stacked as ``(J, c, *shape)`` coefficients.

    ``initial`` optionally carries the datum at ``t = 0``; it is used only by
    the interpolation on the first subinterval.
    """

    def __init__(self, grid, tgrid, coeffs, divergence_free=False, initial=None):
        c = np.array(coeffs, dtype=np.complex128)
        if c.shape[0] != tgrid.J or c.shape[2:] != grid.shape:
            raise ValueError(f"path coefficients {c.shape} do not fit grid/mesh")
        if initial is not None:
            _check_grid(grid, initial.grid)
            if initial.ncomp != c.shape[1]:
                raise ValueError("initial datum has the wrong number of components")
        c.setflags(write=False)
        self.grid = grid
        self.tgrid = tgrid
        self.coeffs = c
        self.divergence_free = bool(divergence_free)
        self.initial = initial

    @classmethod
    def from_fields(cls, fields, tgrid, initial=None):
        fields = list(fields)
        grid = fields[0].grid
        for f in fields:
            _check_grid(grid, f.grid)
        df = all(f.divergence_free for f in fields)
        return cls(grid, tgrid, np.stack([f.coeffs for f in fields]), df, initial)

    @property
    def ncomp(self):
        return self.coeffs.shape[1]

    @property
    def nodes(self):
        return self.tgrid.nodes

    def __len__(self):
        return self.tgrid.J

    def __getitem__(self, j):
        return Field(self.grid, self.coeffs[j], self.divergence_free, self.divergence_free)

    @property
    def fields(self):
        return [self[j] for j in range(len(self))]

    @property
    def final(self):
        return self[-1]

    def physical(self):
        return ifft(self.grid, self.coeffs)

    def with_coeffs(self, coeffs, divergence_free=None, initial=None):
        return PathSample(
            self.grid,
            self.tgrid,
            coeffs,
            self.divergence_free if divergence_free is None else divergence_free,
            initial,
        )

    def _check_compatible(self, other):
        if self.grid != other.grid or self.tgrid != other.tgrid:
            raise GridMismatchError("paths live on different grids or meshes")

    def _combine(self, other, op):
        if not isinstance(other, PathSample):
            return NotImplemented
        self._check_compatible(other)
        init = None
        if self.initial is not None and other.initial is not None:
            init = self.initial.with_coeffs(op(self.initial.coeffs, other.initial.coeffs))
        return PathSample(
            self.grid,
            self.tgrid,
            op(self.coeffs, other.coeffs),
            self.divergence_free and other.divergence_free,
            init,
        )

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        init = None if self.initial is None else self.initial * scalar
        return self.with_coeffs(self.coeffs * scalar, initial=init)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def save(self, directory):
        """Write ``tgrid.json`` plus one field container per node."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        meta = {
            "tgrid": self.tgrid.to_dict(),
            "nodes": [float(t) for t in self.nodes],
            "divergence_free": self.divergence_free,
            "has_initial": self.initial is not None,
            "files": [f"node_{j:05d}.nslg" for j in range(len(self))],
        }
        (d / "tgrid.json").write_text(json.dumps(meta, indent=1))
        for j, name in enumerate(meta["files"]):
            write_field(d / name, self[j])
        if self.initial is not None:
            write_field(d / "initial.nslg", self.initial)
        return [d / "tgrid.json"] + [d / n for n in meta["files"]] + (
            [d / "initial.nslg"] if self.initial is not None else []
        )

    @classmethod
    def load(cls, directory):
        d = Path(directory)
        meta = json.loads((d / "tgrid.json").read_text())
        tg = TimeGrid(**meta["tgrid"])
        fields = [read_field(d / n) for n in meta["files"]]
        init = read_field(d / "initial.nslg") if meta["has_initial"] else None
        grid = fields[0].grid
        return cls(grid, tg, np.stack([f.coeffs for f in fields]), meta["divergence_free"], init)


def heat_path(u0, tgrid):
    """``t -> exp(t Laplacian) u0`` sampled on the mesh."""
    g = u0.grid
    sym = np.exp(-np.multiply.outer(tgrid.nodes, g.ksq))
    return PathSample(g, tgrid, u0.coeffs[None] * sym[:, None], u0.divergence_free, u0)


def zero_path(grid, tgrid, ncomp=None):
    c = grid.dim if ncomp is None else ncomp
    init = Field(grid, np.zeros((c,) + grid.shape), True, True)
    return PathSample(grid, tgrid, np.zeros((tgrid.J, c) + grid.shape), True, init)


# ----------------------------------------------------------------- Duhamel


def _interp_weights(tgrid, has_initial):
    """Right-node weight ``lam`` per Gauss point: linear in ``ln tau``, or in ``tau`` on the first interval."""
    t = tgrid.nodes
    tau, _ = tgrid.quadrature()
    lam = np.empty_like(tau)
    lam[0] = tau[0] / t[0] if has_initial else 1.0
    lam[1:] = np.log(tau[1:] / t[:-1, None]) / np.log(t[1:] / t[:-1])[:, None]
    return lam


def _left_right(path):
    phys = path.physical()
    first = phys[:1] if path.initial is None else path.initial.physical()[None]
    left = np.concatenate([first, phys[:-1]])
    return left, phys


def bilinear_B(u, v, symmetrize=False, chunk=None):
    """Duhamel bilinear operator on sampled paths; returns a divergence-free path.

    With ``symmetrize`` the tensor ``u (x) v`` is replaced by its symmetric
    part, so ``bilinear_B(a, u, True) = (B(a, u) + B(u, a)) / 2``.
    """
    u._check_compatible(v)
    g, tg = u.grid, u.tgrid
    if u.ncomp != g.dim or v.ncomp != g.dim:
        raise ValueError("bilinear_B needs vector paths")
    J, Q = tg.J, tg.quad_order
    tau, wt = tg.quadrature()
    lam_u = _interp_weights(tg, u.initial is not None)
    lam_v = _interp_weights(tg, v.initial is not None)
    ul, ur = _left_right(u)
    vl, vr = _left_right(v)

    sel = np.flatnonzero(g.dealias_mask.ravel())
    ksq = np.ascontiguousarray(g.ksq.ravel()[sel])
    d = g.dim
    bshape = (slice(None), slice(None)) + (None,) * (d + 1)
    if chunk is None:
        per_point = d * d * g.npoints * 16
        chunk = max(1, int(64e6 // (per_point * Q)))
    carry = np.zeros((d, sel.size), dtype=np.complex128)
    out = np.empty((J, d, sel.size), dtype=np.complex128)
    t_prev = 0.0
    for a in range(0, J, chunk):
        b = min(J, a + chunk)
        lu = lam_u[a:b][bshape]
        lv = lam_v[a:b][bshape]
        ui = (1.0 - lu) * ul[a:b, None] + lu * ur[a:b, None]
        vi = (1.0 - lv) * vl[a:b, None] + lv * vr[a:b, None]
        S = product_coeffs(g, ui, vi, symmetrize)
        D = tensor_divergence_coeffs(g, S).reshape(b - a, Q, d, -1)
        src = np.ascontiguousarray(D[..., sel])
        out[a:b] = _kernels.duhamel_scan(
            src, ksq, np.ascontiguousarray(tg.nodes[a:b]),
            np.ascontiguousarray(tau[a:b]), np.ascontiguousarray(wt[a:b]), carry, t_prev,
        )
        t_prev = tg.nodes[b - 1]
    full = np.zeros((J, d, g.npoints), dtype=np.complex128)
    full[..., sel] = out
    full = leray_coeffs(g, full.reshape((J, d) + g.shape))
    init = Field(g, np.zeros((d,) + g.shape), True, True)
    return PathSample(g, tg, full, True, init)


# ------------------------------------------------------------- path norms


@dataclass
class PathNorms:
    x_norm: float = None
    v_parts: tuple = None
    limit_flags: dict = None
    argmax_t: float = None

    @property
    def v_norm(self):
        return None if self.v_parts is None else float(sum(self.v_parts))

    def to_dict(self):
        return {
            "x_norm": self.x_norm,
            "v_parts": None if self.v_parts is None else list(self.v_parts),
            "v_norm": self.v_norm,
            "limit_flags": self.limit_flags,
            "argmax_t": self.argmax_t,
        }


def _node_sup_norms(path):
    phys = path.physical()
    return magnitude(phys, path.grid).reshape(len(path), -1).max(axis=1)


def _node_xr_norms(path, r, tol=1e-10):
    vals, _ = base_norms(path.grid, path.coeffs, BaseSpace.Xr(r), tol=tol)
    return vals


def _vanishing(weighted):
    """Earliest three weighted values decrease toward 0 as t decreases (10 % slack)."""
    w = np.asarray(weighted[:3], dtype=float)
    if not np.any(np.asarray(weighted) != 0):
        return True
    steps = bool(w[0] <= 1.1 * w[1] and w[1] <= 1.1 * w[2])
    return steps and bool(w[0] <= 0.9 * w[2])


def path_weighted(path, kind="x", r=None, xr_tol=1e-10):
    """Per-node weighted values used by the path norms."""
    t = path.nodes
    T = path.tgrid.T
    if kind == "x":
        return log_weight(t, T) * _node_sup_norms(path)
    if kind == "sqrt_linf":
        return np.sqrt(t) * _node_sup_norms(path)
    if kind == "xr":
        return t ** (0.5 * (1.0 - r)) * _node_xr_norms(path, r, xr_tol)
    raise ValueError(f"unknown weight kind {kind!r}")


def path_norm_X(u):
    """``max_j sqrt(t_j) |ln(t_j/(e^2 T))| ||u(t_j)||_inf`` and its vanishing flag."""
    w = path_weighted(u, "x")
    i = int(np.argmax(w))
    return PathNorms(x_norm=float(w[i]), limit_flags={"x": _vanishing(w)}, argmax_t=float(u.nodes[i]))


def _lq_time(values, t, q):
    """``(int_0^T |f|^q dt)^{1/q}`` from node values: trapezoid plus a first-cell rectangle."""
    fq = np.asarray(values, dtype=float) ** q
    total = t[0] * fq[0] + np.sum(0.5 * (fq[1:] + fq[:-1]) * np.diff(t))
    return float(total ** (1.0 / q))


def path_norm_V(u, r, xr_tol=1e-10, xr_values=None):
    """Three parts: ``L^{q_r}_T X_r``, ``sup t^{(1-r)/2} ||.||_{X_r}``, ``sup sqrt(t) ||.||_inf``."""
    t = u.nodes
    q = 2.0 / (1.0 - r)
    xr = _node_xr_norms(u, r, xr_tol) if xr_values is None else np.asarray(xr_values)
    sup_x = t ** (0.5 * (1.0 - r)) * xr
    sup_l = np.sqrt(t) * _node_sup_norms(u)
    parts = (_lq_time(xr, t, q), float(sup_x.max()), float(sup_l.max()))
    flags = {"xr": _vanishing(sup_x), "linf": _vanishing(sup_l)}
    return PathNorms(v_parts=parts, limit_flags=flags)


# ------------------------------------------------------- scalar integrals


def logweight_convolution_check(t, T=1.0):
    """Both sides of ``int_0^t (t-tau)^{-1/2} tau^{-1} L(tau)^{-2} dtau <= C t^{-1/2} L(t)^{-1}``.

    ``L(tau) = |ln(tau/(e^2 T))|``.  The integral is split at ``t/2``; the
    left piece uses ``u = L(tau)`` and the right piece ``tau = t(1 - s^2)``.
    """
    if not 0 < t <= T:
        raise ValueError(f"need 0 < t <= T, got t={t}, T={T}")

    def L(x):
        return 2.0 + math.log(T / x)

    e2T = math.exp(2.0) * T

    def left(uu):
        tau = e2T * math.exp(-uu)
        return (t - tau) ** -0.5 / uu**2

    def right(s):
        tau = t * (1.0 - s * s)
        return 2.0 * math.sqrt(t) / (tau * L(tau) ** 2)

    i1, e1 = integrate.quad(left, L(0.5 * t), np.inf, epsabs=0.0, epsrel=1e-12, limit=200)
    i2, e2 = integrate.quad(right, 0.0, math.sqrt(0.5), epsabs=0.0, epsrel=1e-12, limit=200)
    lhs = i1 + i2
    if not np.isfinite(lhs) or e1 + e2 > 1e-8 * lhs:
        raise ArithmeticError(f"quadrature failed at t={t}: error estimate {e1 + e2:.3e}")
    rhs = t**-0.5 / L(t)
    return lhs, rhs, lhs / rhs


def _lemma33_rule(theta, order):
    """Nodes ``s`` and weights for ``int_0^1 (1-s)^{-1/2} s^{-1/2-theta} f(s) ds``."""
    x, w = np.polynomial.legendre.leggauss(order)
    p = 1.0 / (0.5 - theta)
    # s = y**p on [0, 1/2]: the Jacobian cancels the s^{-1/2-theta} singularity
    ymax = 0.5 ** (1.0 / p)
    y = 0.5 * ymax * (x + 1.0)
    s1 = y**p
    w1 = 0.5 * ymax * w * p * (1.0 - s1) ** -0.5
    # s = 1 - sig**2 on [1/2, 1]: removes the (1-s)^{-1/2} endpoint
    smax = math.sqrt(0.5)
    sig = 0.5 * smax * (x + 1.0)
    s2 = 1.0 - sig**2
    w2 = 0.5 * smax * w * 2.0 * s2 ** (-0.5 - theta)
    return np.concatenate([s1, s2]), np.concatenate([w1, w2])


def lemma33_operator(f, theta, q, T=1.0, mesh=None, order=48):
    """Apply ``g(t) = int_0^t ((t-tau) tau)^{-1/2} (t/tau)^theta f(tau) dtau``.

    ``f`` is a vectorized callable or an array of values at the mesh
    midpoints (then interpolated linearly in ``ln t``, held constant below the
    first point).  Returns ``(g, input_norm, output_norm)`` with norms in
    ``L^q((0,T), dt/t)`` by the midpoint rule of the geometric mesh.
    """
    if not 0 < theta < 0.5:
        raise ValueError(f"theta must lie in (0, 1/2), got {theta}")
    if not q >= 1:
        raise ValueError(f"q must be >= 1, got {q}")
    mesh = mesh or LogMesh(T, J=200)
    t = mesh.midpoints
    if callable(f):
        func = f
        fvals = np.asarray(f(t), dtype=float) * np.ones_like(t)
    else:
        fvals = np.asarray(f, dtype=float)
        if fvals.shape != t.shape:
            raise ValueError("sampled f must live on the mesh midpoints")
        lt = np.log(t[::-1])
        fv = fvals[::-1]

        def func(x):
            return np.interp(np.log(x), lt, fv)

    s, w = _lemma33_rule(theta, order)
    g = np.array([np.dot(w, func(ti * s)) for ti in t])

    def norm(vals):
        if math.isinf(q):
            return float(np.max(np.abs(vals)))
        return float((mesh.weight * np.sum(np.abs(vals) ** q)) ** (1.0 / q))

    return g, norm(fvals), norm(g)


# ---------------------------------------------------- bilinear constant

_CB_CACHE = {}


def bilinear_constant(grid, tgrid, n_pairs=30, seed=0, kmax=None):
    """Largest observed ``||B(u,v)||_X / (||u||_X ||v||_X)`` over random heat-flow pairs.

    Used to set smallness gates; cached per ``(grid, tgrid, n_pairs, seed)``.
    """
    from .families import random_band

    key = (grid, tgrid, n_pairs, seed, kmax)
    if key in _CB_CACHE:
        return _CB_CACHE[key]
    rng = np.random.default_rng(seed)
    kcap = kmax or max(1, grid.kmax_dealias // 2)
    worst = 0.0
    ratios = []
    for _ in range(n_pairs):
        ku, kv = rng.integers(1, kcap + 1, size=2)
        u = heat_path(random_band(grid, int(ku), int(rng.integers(2**31))), tgrid)
        v = heat_path(random_band(grid, int(kv), int(rng.integers(2**31))), tgrid)
        ratio = path_norm_X(bilinear_B(u, v)).x_norm / (
            path_norm_X(u).x_norm * path_norm_X(v).x_norm
        )
        ratios.append(ratio)
        worst = max(worst, ratio)
    _CB_CACHE[key] = (worst, ratios)
    return worst, ratios
