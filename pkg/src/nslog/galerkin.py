"""Galerkin approximation on a real divergence-free Fourier basis.

Members are ``sqrt(2/V) e cos(k.x)`` and ``sqrt(2/V) e sin(k.x)`` for one
representative ``k`` of each pair ``+-k`` inside the dealiased band, with ``e``
running over an orthonormal basis of the plane perpendicular to ``k`` (one
vector in 2D, two in 3D).  Ordering: ``|k|``, then ``k`` lexicographically,
then polarization, then cosine before sine.

Triple products of in-band fields have frequencies below ``M``, so every
discrete integral used for ``b`` and ``c`` is exact.
"""

import csv
import hashlib
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

from . import _kernels
from .duhamel import PathSample, TimeGrid
from .errors import NumericalError
from .spaces import BaseSpace, base_norms
from .spectral import Field, fft, ifft, magnitude, product_coeffs, tensor_divergence_coeffs

__all__ = [
    "DivFreeBasis",
    "GalerkinState",
    "build_basis",
    "coeff_c",
    "coeff_c_spectral",
    "coeff_b",
    "drift_pairing",
    "integrate_galerkin",
    "energy_report",
    "cache_dir",
]

BASIS_VERSION = 1


def _perps(k):
    k = np.asarray(k, dtype=float)
    if k.size == 2:
        e = np.array([-k[1], k[0]])
        return [e / np.linalg.norm(e)]
    axis = np.eye(3)[int(np.argmin(np.abs(k)))]
    e1 = np.cross(k, axis)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(k / np.linalg.norm(k), e1)
    return [e1, e2 / np.linalg.norm(e2)]


def _representatives(grid):
    K = grid.kmax_dealias
    rng = range(-K, K + 1)
    reps = []
    for n in np.array(np.meshgrid(*([list(rng)] * grid.dim), indexing="ij")).reshape(grid.dim, -1).T:
        nz = np.flatnonzero(n)
        if nz.size and n[nz[0]] > 0:
            reps.append(tuple(int(v) for v in n))
    reps.sort(key=lambda n: (sum(v * v for v in n), n))
    return reps


@dataclass(eq=False)
class DivFreeBasis:
    grid: object
    n: int
    wavevectors: np.ndarray  # (n, dim) integer k per member
    polarizations: np.ndarray  # (n, dim) unit vectors
    parity: np.ndarray  # 0 for cosine, 1 for sine

    @property
    def ksq(self):
        return np.sum((self.wavevectors / self.grid.period) ** 2, axis=1)

    def physical(self):
        """Node values ``(n, dim, *shape)``."""
        g = self.grid
        x = g.x / g.period
        amp = math.sqrt(2.0 / g.volume)
        out = np.empty((self.n, g.dim) + g.shape)
        for m in range(self.n):
            arg = np.tensordot(self.wavevectors[m], x, axes=1)
            wave = np.cos(arg) if self.parity[m] == 0 else np.sin(arg)
            out[m] = amp * self.polarizations[m][(slice(None),) + (None,) * g.dim] * wave
        return out

    def coeffs(self):
        c = fft(self.grid, self.physical())
        c[(slice(None), slice(None)) + self.grid.zero_index()] = 0.0  # FFT roundoff only
        return c

    def gradients(self):
        """``(n, dim_a, dim_b, *shape)`` with entry ``d_a w_b``."""
        g = self.grid
        c = self.coeffs()
        kk = g.k[None, :, None]
        return ifft(g, 1j * kk * c[:, None])

    def members(self):
        return [Field(self.grid, c, True, True) for c in self.coeffs()]

    def project(self, f):
        """Coefficients ``<f, w_k>``."""
        phys = f.physical()
        w = self.physical()
        return np.tensordot(w, phys, axes=(tuple(range(1, w.ndim)), tuple(range(phys.ndim)))) * self.grid.cell_volume

    def synthesize(self, g):
        """Field with coefficients ``g`` (or path coefficients for ``(J, n)`` input)."""
        c = self.coeffs()
        return np.tensordot(np.asarray(g, dtype=float), c, axes=(-1, 0))

    def key(self):
        g = self.grid
        return f"d{g.dim}_m{g.modes}_l{g.period!r}_n{self.n}_v{BASIS_VERSION}"


def build_basis(grid, n):
    reps = _representatives(grid)
    per = 2 * (grid.dim - 1)
    if n < 1 or n > per * len(reps):
        raise ValueError(f"n={n} outside 1..{per * len(reps)} for {grid}")
    ks, es, par = [], [], []
    for k in reps:
        for e in _perps(k):
            for p in (0, 1):
                ks.append(k)
                es.append(e)
                par.append(p)
                if len(ks) == n:
                    return DivFreeBasis(grid, n, np.array(ks), np.array(es), np.array(par))
    raise AssertionError("unreachable")


# ------------------------------------------------------------ coefficients


def cache_dir():
    root = os.environ.get("NSLOG_CACHE_DIR")
    if root:
        return Path(root)
    return Path.home() / ".cache" / "nslog"


def _assemble_c(basis):
    """``c[i, j, k] = int w_j . ((w_i . grad) w_k)`` from node values."""
    g = basis.grid
    w = basis.physical().reshape(basis.n, g.dim, -1)
    grad = basis.gradients().reshape(basis.n, g.dim, g.dim, -1)
    n = basis.n
    c = np.empty((n, n, n))
    wf = w.reshape(n, -1)
    for i in range(n):
        # (w_i . grad) w_k, component b: sum_a w_ia d_a w_kb
        adv = np.einsum("ap,kabp->kbp", w[i], grad).reshape(n, -1)
        c[i] = wf @ adv.T
    return c * g.cell_volume


def coeff_c(basis, use_cache=True):
    """Dense ``n x n x n`` tensor, cached on disk with a content hash."""
    path = cache_dir() / f"c_{basis.key()}.npz"
    if use_cache and path.exists():
        try:
            data = np.load(path)
            c = data["c"]
            if hashlib.sha256(c.tobytes()).hexdigest() == str(data["sha256"]):
                return c
        except (OSError, KeyError, ValueError):
            pass
    c = _assemble_c(basis)
    if use_cache:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp.npz")
            np.savez(tmp, c=c, sha256=hashlib.sha256(c.tobytes()).hexdigest())
            os.replace(tmp, path)
        except OSError:
            pass
    return c


def coeff_c_spectral(basis):
    """Second assembly: ``c[i, j, k] = -int w_k . div(w_i (x) w_j)`` by Parseval."""
    g = basis.grid
    n = basis.n
    wc = basis.coeffs()
    wp = ifft(g, wc)
    c = np.empty((n, n, n))
    flat_k = wc.reshape(n, -1)
    for i in range(n):
        S = product_coeffs(g, np.broadcast_to(wp[i], wp.shape), wp)
        D = tensor_divergence_coeffs(g, S).reshape(n, -1)
        c[i] = -g.volume * (np.conj(flat_k) @ D.T).real.T
    return c


def _drift_matrix(basis, a_phys, w=None, grad=None):
    """``2 int (a (x)_s w_j) : grad w_k`` for one node of ``a``."""
    g = basis.grid
    n = basis.n
    w = basis.physical() if w is None else w
    grad = basis.gradients() if grad is None else grad
    w = w.reshape(n, g.dim, -1)
    grad = grad.reshape(n, g.dim, g.dim, -1)
    a = a_phys.reshape(g.dim, -1)
    G = np.einsum("ap,kabp->kbp", a, grad)  # (a . grad) w_k
    H = np.einsum("bp,kabp->kap", a, grad)  # sum_b a_b d_a w_kb
    wf = w.reshape(n, -1)
    return (wf @ G.reshape(n, -1).T + wf @ H.reshape(n, -1).T) * g.cell_volume


def coeff_b(a, basis, t=None, drift_nodes=None):
    """``b_jk(t) = -|k_j|^2 delta_jk + 2 int (a (x)_s w_j) : grad w_k``.

    ``a`` is a PathSample or None; between nodes the drift part is
    interpolated linearly in ``ln t`` (it is linear in ``a``).
    """
    lap = -np.diag(basis.ksq)
    if a is None:
        return lap
    nodes = a.nodes
    if t is None or t < 0 or t > nodes[-1] * (1 + 1e-14):
        raise ValueError(f"t={t} outside the drift mesh (0, {nodes[-1]}]")
    if drift_nodes is None:
        drift_nodes = _drift_table(a, basis)
    return lap + _interp_drift(drift_nodes, nodes, t)


def _drift_table(a, basis):
    """``(J + 1, n, n)``: drift at ``t = 0`` (from ``a.initial`` or the first node) then at each node."""
    w = basis.physical()
    grad = basis.gradients()
    phys = a.physical()
    first = a.initial.physical() if a.initial is not None else phys[0]
    out = np.empty((len(a) + 1, basis.n, basis.n))
    out[0] = _drift_matrix(basis, first, w, grad)
    for j in range(len(a)):
        out[j + 1] = _drift_matrix(basis, phys[j], w, grad)
    return out


def _interp_drift(table, nodes, t):
    if t <= nodes[0]:
        lam = t / nodes[0]
        return (1 - lam) * table[0] + lam * table[1]
    j = int(np.searchsorted(nodes, t))
    j = min(max(j, 1), len(nodes) - 1)
    lam = math.log(t / nodes[j - 1]) / math.log(nodes[j] / nodes[j - 1])
    return (1 - lam) * table[j] + lam * table[j + 1]


def drift_pairing(a_field, u_field):
    """``int (a (x)_s u) : grad u``; equals ``int u . ((a . grad) u)``."""
    g = a_field.grid
    a = a_field.physical()
    u = u_field.physical()
    grad = ifft(g, 1j * g.k[:, None] * u_field.coeffs[None])  # d_a u_b
    sym = 0.5 * (a[:, None] * u[None] + u[:, None] * a[None])
    return float(np.sum(sym * grad) * g.cell_volume)


# --------------------------------------------------------------- the ODE


@dataclass
class GalerkinState:
    basis: DivFreeBasis
    tgrid: TimeGrid
    times: np.ndarray  # 0 followed by the mesh nodes
    g: np.ndarray  # (len(times), n)
    dissipation: np.ndarray  # int_0^t ||grad u_n||^2
    stats: dict = field(default_factory=dict)

    @property
    def energy(self):
        return np.sum(self.g**2, axis=1)

    def to_path(self):
        g0 = self.basis.synthesize(self.g[0])
        coeffs = self.basis.synthesize(self.g[1:])
        grid = self.basis.grid
        return PathSample(grid, self.tgrid, coeffs, True, Field(grid, g0, True, True))

    def field_at(self, j):
        return Field(self.basis.grid, self.basis.synthesize(self.g[j]), True, True)


def integrate_galerkin(u0, a, basis, T=None, ode_tol=(1e-10, 1e-8), tgrid=None, c=None,
                       blowup=1e6, max_step=np.inf):
    """Integrate ``g' = b(t)^T g + c(g, g)`` with an embedded RK4(5) scheme.

    ``ode_tol`` is ``(atol, rtol)``.  The state carries the dissipation
    integral so the energy identity can be checked without re-quadrature.
    """
    if tgrid is None:
        tgrid = a.tgrid if a is not None else TimeGrid(T)
    T = tgrid.T
    if a is not None and a.tgrid != tgrid:
        raise ValueError("drift path must live on the output mesh")
    atol, rtol = ode_tol
    n = basis.n
    g0 = basis.project(u0)
    c = coeff_c(basis) if c is None else c
    lap = -basis.ksq
    table = _drift_table(a, basis) if a is not None else None
    nodes = tgrid.nodes
    scale0 = max(float(np.linalg.norm(g0)), 1e-300)

    def rhs(t, y):
        g = y[:n]
        if table is None:
            dg = lap * g
        else:
            b = np.diag(lap) + _interp_drift(table, nodes, t)
            dg = b.T @ g
        dg = dg + _kernels.cubic_form(c, g)
        return np.concatenate([dg, [np.dot(basis.ksq, g * g)]])

    def blown(t, y):
        return blowup * scale0 - np.linalg.norm(y[:n])

    blown.terminal = True
    y0 = np.concatenate([g0, [0.0]])
    if not np.any(g0):
        zeros = np.zeros((tgrid.J + 1, n))
        return GalerkinState(basis, tgrid, np.concatenate([[0.0], nodes]), zeros,
                             np.zeros(tgrid.J + 1), {"steps": 0, "rejected": 0, "atol": atol, "rtol": rtol})
    sol = solve_ivp(rhs, (0.0, T), y0, method="RK45", t_eval=nodes, atol=atol, rtol=rtol,
                    events=blown if np.isfinite(blowup) else None, max_step=max_step)
    stats = {
        "nfev": int(sol.nfev),
        "status": int(sol.status),
        "message": sol.message,
        "atol": atol,
        "rtol": rtol,
    }
    if sol.status == 1:
        raise NumericalError("Galerkin coefficients blew up", last_time=float(sol.t_events[0][0]))
    if sol.status != 0:
        last = float(sol.t[-1]) if sol.t.size else 0.0
        raise NumericalError(f"ODE integration failed: {sol.message}", last_time=last)
    # RK45 spends six evaluations per attempted step (first-same-as-last)
    attempts = max(0, (sol.nfev - 2) // 6)
    stats["steps"] = attempts
    y = np.concatenate([y0[None], sol.y.T])
    return GalerkinState(basis, tgrid, np.concatenate([[0.0], nodes]), y[:, :n], y[:, n], stats)


# -------------------------------------------------------- energy report


def _time_integral(values, times):
    """Cumulative trapezoid from 0."""
    out = np.zeros_like(values, dtype=float)
    out[1:] = np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(times))
    return out


def _drift_weights(path, kind, r):
    """Node values at ``t = 0`` and the mesh nodes for ``||a1||_inf^2`` or ``||a2||_{X_r}^{2/(1-r)}``."""
    g = path.grid
    first = path.initial.coeffs if path.initial is not None else path.coeffs[0]
    stack = np.concatenate([first[None], path.coeffs])
    if kind == "inf":
        vals = magnitude(ifft(g, stack), g).reshape(stack.shape[0], -1).max(axis=1)
        return vals**2
    vals, _ = base_norms(g, stack, BaseSpace.Xr(r), tol=1e-10)
    return vals ** (2.0 / (1.0 - r))


def energy_report(st, a1=None, a2=None, r=0.5, csv_path=None):
    """Fit the smallest ``C`` with ``E(t) + int_0^t ||grad u||^2 <= E(0) exp(C A(t))``."""
    t = st.times
    E = st.energy
    D = st.dissipation
    A = np.zeros_like(t)
    if a1 is not None:
        A += _time_integral(_drift_weights(a1, "inf", r), t)
    if a2 is not None:
        A += _time_integral(_drift_weights(a2, "xr", r), t)
    E0 = E[0]
    lhs = E + D
    C = 0.0
    if E0 > 0:
        with np.errstate(divide="ignore", invalid="ignore"):
            need = np.where(A > 0, np.log(lhs / E0) / A, 0.0)
        bad = (A <= 0) & (lhs > E0 * (1 + 1e-9))
        if np.any(bad):
            C = float("inf")
        else:
            C = max(0.0, float(np.max(need)))
    envelope = E0 * np.exp(C * A) if np.isfinite(C) else np.full_like(t, np.inf)
    holds = bool(np.all(lhs <= envelope * (1 + 1e-12) + 1e-300))
    # the sup-in-time form
    sup_form = float(E.max() + D[-1])
    report = {
        "C": C,
        "E0": float(E0),
        "lhs_max": float(lhs.max()),
        "sup_form_lhs": sup_form,
        "sup_form_rhs": float(envelope[-1]),
        "holds": holds,
        "energy_identity_defect": float(np.max(np.abs(E + 2 * D - E0))) if a1 is None and a2 is None else None,
        "rows": [(float(a), float(b), float(c_), float(d)) for a, b, c_, d in zip(t, E, D, envelope)],
    }
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "energy", "dissipation_integral", "rhs_envelope"])
            for row in report["rows"]:
                w.writerow([repr(v) for v in row])
    return report
