"""Mild solutions of the equation linearized-perturbed by a drift path ``a``:

``u = e^{t Lap} u0 + L(a) u - B(u, u)`` with ``L(a) u = -B(a, u) - B(u, a)``,

solved as ``u = [I - L(a)]^{-1} (e^{t Lap} u0 - B(u, u))`` in the ``V_T`` norm.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .duhamel import (
    PathSample,
    bilinear_B,
    heat_path,
    path_norm_V,
)
from .errors import ConvergenceError, GateError, NonContractionError
from .families import random_band
from .mild import _check_data, picard

__all__ = [
    "PerturbedConfig",
    "PerturbedSolution",
    "apply_L",
    "apply_L_split",
    "drift_gate",
    "invert_I_minus_L",
    "bilinear_constant_V",
    "resample_path",
    "solve_perturbed",
]


@dataclass
class PerturbedConfig:
    r: float = 0.5
    eps_data: float = None
    tol: float = 1e-10
    max_iter: int = 60
    resolvent_tol: float = 1e-12
    resolvent_max_iter: int = None
    n_probes: int = 12
    safety: float = 1.25
    max_halvings: int = 6
    seed: int = 0
    T: float = 1.0
    xr_tol: float = 1e-10

    def __post_init__(self):
        if not 0 < self.r < 1:
            raise ValueError("r must lie strictly inside (0, 1)")
        if not self.tol > 0 or not self.resolvent_tol > 0:
            raise ValueError("tolerances must be positive")

    @property
    def s_r(self):
        return -1.0 + self.r

    @property
    def q_r(self):
        return 2.0 / (1.0 - self.r)

    def neumann_cap(self):
        if self.resolvent_max_iter is not None:
            return self.resolvent_max_iter
        return math.ceil(math.log(self.resolvent_tol) / math.log(0.5)) + 10


@dataclass
class PerturbedSolution:
    path: PathSample
    iterates: int
    contraction_ratios: list
    residual: float
    gate_value: float
    eps: float
    drift_gate: float
    resolvent_iterations: list
    v_norm_components: tuple
    limit_flags: dict
    T: float
    halvings: int = 0
    distances: list = field(default_factory=list)

    def record(self):
        return {
            "gate_value": self.gate_value,
            "eps": self.eps,
            "iterations": self.iterates,
            "ratios": list(self.contraction_ratios),
            "distances": list(self.distances),
            "residual": self.residual,
            "drift_gate": self.drift_gate,
            "resolvent_iterations": list(self.resolvent_iterations),
            "v_norm_components": list(self.v_norm_components),
            "limit_flags": self.limit_flags,
            "T": self.T,
            "halvings": self.halvings,
        }

    def to_json(self):
        return json.dumps(self.record(), indent=1)


def apply_L(a, u):
    """``L(a) u = -2 B_s(a, u)`` through the symmetrized tensor product."""
    return bilinear_B(a, u, symmetrize=True) * -2.0


def apply_L_split(a, u):
    """``-B(a, u) - B(u, a)`` assembled from two plain Duhamel evaluations."""
    return -(bilinear_B(a, u) + bilinear_B(u, a))


def _v(path, cfg):
    return path_norm_V(path, cfg.r, cfg.xr_tol).v_norm


def _probes(grid, tgrid, n, seed):
    """Random heat-flow paths, half of them reshaped in time by ``(t/T)^alpha``."""
    rng = np.random.default_rng(seed)
    out = []
    kcap = max(1, grid.kmax_dealias // 2)
    for i in range(n):
        p = heat_path(random_band(grid, int(rng.integers(1, kcap + 1)), int(rng.integers(2**31))), tgrid)
        if i % 2:
            alpha = rng.uniform(0.0, 0.5)
            prof = (tgrid.nodes / tgrid.T) ** alpha
            p = p.with_coeffs(p.coeffs * prof.reshape((-1,) + (1,) * (p.coeffs.ndim - 1)))
        out.append(p)
    return out


def drift_gate(a, cfg, probes=None):
    """``safety * max ||L(a) p||_V / ||p||_V`` over the probe battery."""
    if not np.any(a.coeffs):
        return 0.0, []
    probes = probes or _probes(a.grid, a.tgrid, cfg.n_probes, cfg.seed)
    amps = []
    for p in probes:
        size = _v(p, cfg)
        amps.append(_v(apply_L(a, p), cfg) / size if size > 0 else 0.0)
    return cfg.safety * max(amps), amps


def invert_I_minus_L(a, rhs, cfg=None, tol=None, max_iter=None):
    """Neumann iteration ``x <- rhs + L(a) x``; returns ``(x, residual_history)``.

    The residual ``||x - rhs - L(a) x||_V`` equals the size of the next update.
    """
    cfg = cfg or PerturbedConfig(T=a.tgrid.T)
    tol = cfg.resolvent_tol if tol is None else tol
    max_iter = cfg.neumann_cap() if max_iter is None else max_iter
    x = rhs
    hist = []
    streak = 0
    if not np.any(a.coeffs):
        return rhs, [0.0]
    for _ in range(max_iter):
        new = rhs + apply_L(a, x)
        res = _v(new - x, cfg)
        if hist and hist[-1] > 0:
            streak = streak + 1 if res >= hist[-1] else 0
            if streak >= 3:
                raise NonContractionError("Neumann iteration stagnated", residuals=hist + [res])
        hist.append(res)
        x = new
        if res <= tol * max(1.0, _v(rhs, cfg)) or res == 0:
            return x, hist
    raise ConvergenceError("Neumann iteration hit its cap", best_estimate=x, residuals=hist)


def bilinear_constant_V(grid, tgrid, r, n_pairs=8, seed=1, xr_tol=1e-10):
    """Largest observed ``||B(u,v)||_V / (||u||_V ||v||_V)`` on random heat-flow pairs."""
    cfg = PerturbedConfig(r=r, T=tgrid.T, xr_tol=xr_tol)
    rng = np.random.default_rng(seed)
    kcap = max(1, grid.kmax_dealias // 2)
    worst = 0.0
    for _ in range(n_pairs):
        u = heat_path(random_band(grid, int(rng.integers(1, kcap + 1)), int(rng.integers(2**31))), tgrid)
        v = heat_path(random_band(grid, int(rng.integers(1, kcap + 1)), int(rng.integers(2**31))), tgrid)
        worst = max(worst, _v(bilinear_B(u, v), cfg) / (_v(u, cfg) * _v(v, cfg)))
    return worst


def resample_path(path, tgrid):
    """Interpolate a path onto another mesh inside its horizon (linear in ``ln t``)."""
    t_old = path.nodes
    t_new = tgrid.nodes
    if t_new[-1] > t_old[-1] * (1 + 1e-14):
        raise ValueError("cannot extrapolate a path beyond its horizon")
    out = np.empty((tgrid.J,) + path.coeffs.shape[1:], dtype=np.complex128)
    for i, t in enumerate(t_new):
        j = int(np.searchsorted(t_old, t))
        j = min(j, len(t_old) - 1)
        if j == 0:
            if path.initial is not None:
                lam = t / t_old[0]
                out[i] = (1 - lam) * path.initial.coeffs + lam * path.coeffs[0]
            else:
                out[i] = path.coeffs[0]
            continue
        lam = math.log(t / t_old[j - 1]) / math.log(t_old[j] / t_old[j - 1])
        out[i] = (1 - lam) * path.coeffs[j - 1] + lam * path.coeffs[j]
    return PathSample(path.grid, tgrid, out, path.divergence_free, path.initial)


def _solve_once(a, u0, cfg, tgrid, c_v):
    gate, _ = drift_gate(a, cfg)
    if gate > 0.5:
        raise GateError(f"drift gate {gate:.4g} exceeds 1/2", kind="drift", drift_gate=gate)
    heat = heat_path(u0, tgrid)
    data = _v(heat, cfg)
    eps = cfg.eps_data if cfg.eps_data is not None else 0.1 / c_v
    if data > eps:
        raise GateError(
            f"||e^(t Lap) u0||_V = {data:.4g} exceeds eps = {eps:.4g}",
            kind="data",
            gate_value=data,
            eps=eps,
        )
    counts = []

    def resolvent(p):
        x, hist = invert_I_minus_L(a, p, cfg)
        counts.append(len(hist))
        return x

    start = resolvent(heat)
    u, ratios, dists, _ = picard(
        heat,
        cfg.tol,
        cfg.max_iter,
        lambda p: bilinear_B(p, p),
        linear=resolvent,
        stage="perturbed",
        norm=lambda p: _v(p, cfg),
        start=start,
    )
    resid = _v(u - (heat + apply_L(a, u) - bilinear_B(u, u)), cfg)
    vn = path_norm_V(u, cfg.r, cfg.xr_tol)
    return PerturbedSolution(
        u, len(dists), ratios, resid, data, eps, gate, counts, vn.v_parts, vn.limit_flags,
        tgrid.T, 0, dists,
    )


def solve_perturbed(a, u0, cfg=None, tgrid=None, c_v=None):
    """Gated fixed point; on a drift-gate failure the horizon is halved and retried."""
    cfg = cfg or PerturbedConfig()
    tgrid = tgrid or a.tgrid
    if a.tgrid != tgrid:
        raise ValueError("drift path must live on the solver mesh")
    _check_data(u0)
    if not np.any(u0.coeffs):
        z = heat_path(u0, tgrid)
        gate, _ = drift_gate(a, cfg)
        return PerturbedSolution(z, 1, [], 0.0, 0.0, 0.0, gate, [0], (0.0, 0.0, 0.0),
                                 {"xr": True, "linf": True}, tgrid.T)
    if c_v is None:
        c_v = bilinear_constant_V(u0.grid, tgrid, cfg.r, xr_tol=cfg.xr_tol)
    halvings = 0
    while True:
        try:
            sol = _solve_once(a, u0, cfg, tgrid, c_v)
            sol.halvings = halvings
            return sol
        except GateError as err:
            if err.details.get("kind") != "drift" or halvings >= cfg.max_halvings:
                raise
            halvings += 1
            tgrid = tgrid.with_horizon(0.5 * tgrid.T)
            a = resample_path(a, tgrid)

