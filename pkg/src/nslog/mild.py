"""Picard iteration for ``u = exp(t Laplacian) u0 - B(u, u)`` on sampled paths,
plus an integrating-factor RK4 time stepper used as an independent check.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .duhamel import (
    PathSample,
    TimeGrid,
    bilinear_B,
    bilinear_constant,
    heat_path,
    path_norm_X,
)
from .errors import ConvergenceError, GateError, NonContractionError, NumericalError
from .spectral import Field, ifft, leray_coeffs, magnitude, product_coeffs, tensor_divergence_coeffs

__all__ = [
    "MildConfig",
    "MildSolution",
    "resolve_eps",
    "solve_mild",
    "picard",
    "oracle_timestep",
    "wellposedness_probe",
]

GATE_SAFETY = 0.2  # eps = GATE_SAFETY / C_B, so 4 C_B eps = 0.8


@dataclass
class MildConfig:
    """``eps_ball`` is the radius ``2 eps`` of the iteration ball; ``None`` derives it from C_B."""

    eps_ball: float = None
    max_iter: int = 60
    tol: float = 1e-10
    T: float = 1.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.eps_ball is not None and not self.eps_ball > 0:
            raise ValueError("eps_ball must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class MildSolution:
    path: PathSample
    iterates: int
    contraction_ratios: list
    residual: float
    gate_value: float
    eps: float
    c_b: float
    distances: list = field(default_factory=list)
    ball_radius_max: float = 0.0

    @property
    def first_correction(self):
        """``||u^(1) - u^(0)||_X = ||B(e^{t Lap} u0, e^{t Lap} u0)||_X``."""
        return self.distances[0] if self.distances else 0.0

    def record(self):
        return {
            "gate_value": self.gate_value,
            "eps": self.eps,
            "c_b": self.c_b,
            "iterations": self.iterates,
            "ratios": list(self.contraction_ratios),
            "distances": list(self.distances),
            "residual": self.residual,
            "ball_radius_max": self.ball_radius_max,
        }

    def to_json(self):
        return json.dumps(self.record(), indent=1)


def resolve_eps(grid, tgrid, cfg, c_b=None):
    """Return ``(eps, c_b)``; the configured ball must satisfy ``4 C_B eps < 1``."""
    if c_b is None:
        c_b, _ = bilinear_constant(grid, tgrid)
    if cfg.eps_ball is None:
        return GATE_SAFETY / c_b, c_b
    eps = 0.5 * cfg.eps_ball
    if 4.0 * c_b * eps >= 1.0:
        raise GateError(
            f"eps_ball={cfg.eps_ball} violates 4*C_B*eps < 1 with C_B={c_b:.4g}",
            c_b=c_b,
            eps=eps,
        )
    return eps, c_b


def _check_data(u0):
    g = u0.grid
    if u0.ncomp != g.dim:
        raise ValueError("initial data must be a vector field")
    probe = Field(g, u0.coeffs, True, False)
    bad = probe.check_invariants(1e-10)
    mean = np.abs(u0.coeffs[(slice(None),) + g.zero_index()]).max()
    if bad or mean > 1e-14 * max(1.0, np.abs(u0.coeffs).max()):
        raise ValueError(f"initial data must be divergence free with zero mean: {bad}")


def _x_norm(p):
    return path_norm_X(p).x_norm


def picard(rhs, tol, max_iter, quad, linear=None, stage="mild", norm=_x_norm, start=None):
    """Iterate ``u <- linear(rhs - quad(u))`` with distances in ``norm``.

    ``quad(u)`` returns ``B(u, u)``; ``linear`` (identity when omitted) is the
    resolvent.  Returns ``(u, ratios, distances, radius_max)``.
    """
    u = rhs if start is None else start
    ratios, dists = [], []
    radius = norm(u)
    streak = 0
    for m in range(1, max_iter + 1):
        new = rhs - quad(u)
        if linear is not None:
            new = linear(new)
        d = norm(new - u)
        if dists:
            ratio = d / dists[-1] if dists[-1] > 0 else 0.0
            ratios.append(ratio)
            streak = streak + 1 if ratio >= 1.0 else 0
            if streak >= 3:
                raise NonContractionError(
                    f"{stage} iteration stopped contracting", ratios=ratios, distances=dists
                )
        dists.append(d)
        u = new
        radius = max(radius, norm(u))
        if d <= tol:
            return u, ratios, dists, radius
    raise ConvergenceError(
        f"{stage} iteration hit max_iter={max_iter}", best_estimate=u, ratios=ratios, distances=dists
    )


def solve_mild(u0, cfg=None, tgrid=None, c_b=None):
    """Fixed point of ``u = e^{t Lap} u0 - B(u, u)`` starting from the heat flow."""
    cfg = cfg or MildConfig()
    tgrid = tgrid or TimeGrid(cfg.T)
    if abs(tgrid.T - cfg.T) > 1e-15 * cfg.T:
        raise ValueError("time grid horizon differs from cfg.T")
    _check_data(u0)
    heat = heat_path(u0, tgrid)
    gate = path_norm_X(heat).x_norm
    if not np.any(u0.coeffs):
        return MildSolution(heat, 1, [], 0.0, 0.0, float("nan"), float("nan"), [0.0])
    eps, c_b = resolve_eps(u0.grid, tgrid, cfg, c_b)
    if gate > eps:
        raise GateError(
            f"||e^(t Lap) u0||_X = {gate:.6g} exceeds eps = {eps:.6g}", gate_value=gate, eps=eps
        )
    u, ratios, dists, radius = picard(heat, cfg.tol, cfg.max_iter, lambda p: bilinear_B(p, p))
    residual = path_norm_X(u - (heat - bilinear_B(u, u))).x_norm
    return MildSolution(u, len(dists), ratios, residual, gate, eps, c_b, dists, radius)


# ------------------------------------------------------------ RK4 oracle


def _nonlinear(grid, c):
    """``-P div(u (x) u)`` for coefficients ``c`` of shape ``(dim, *shape)``."""
    phys = ifft(grid, c)
    S = product_coeffs(grid, phys, phys)
    return -leray_coeffs(grid, tensor_divergence_coeffs(grid, S))


def oracle_timestep(u0, T, steps=256, tgrid=None, nonlinear=True, threshold=0.5):
    """Integrating-factor RK4 with exact heat factors, sampled on ``tgrid``.

    Between consecutive nodes the interval is split into substeps no longer
    than ``T / steps``.  A step whose nonlinear increment exceeds
    ``threshold`` times the current sup norm is rejected with NumericalError.
    """
    if steps < 64:
        raise ValueError("steps must be >= 64")
    g = u0.grid
    tgrid = tgrid or TimeGrid(T)
    if abs(tgrid.T - T) > 1e-15 * T:
        raise ValueError("time grid horizon differs from T")
    hmax = T / steps
    ksq = g.ksq
    c = np.array(u0.coeffs)
    out = np.empty((tgrid.J,) + c.shape, dtype=np.complex128)
    t = 0.0

    def N(x):
        return _nonlinear(g, x) if nonlinear else np.zeros_like(x)

    for j, tj in enumerate(tgrid.nodes):
        n = max(1, math.ceil((tj - t) / hmax - 1e-12))
        h = (tj - t) / n
        E = np.exp(-ksq * h)
        E2 = np.exp(-ksq * 0.5 * h)
        for _ in range(n):
            k1 = h * N(c)
            if nonlinear:
                size = magnitude(ifft(g, c), g).max()
                inc = magnitude(ifft(g, k1), g).max()
                if not np.isfinite(inc) or inc > threshold * max(size, 1e-300):
                    raise NumericalError(
                        f"rejected step at t={t:.4g}: increment {inc:.3e} vs size {size:.3e}", t=t
                    )
            k2 = h * N(E2 * (c + 0.5 * k1))
            k3 = h * N(E2 * c + 0.5 * k2)
            k4 = h * N(E * c + E2 * k3)
            c = E * c + (E * k1 + 2.0 * E2 * (k2 + k3) + k4) / 6.0
            t += h
        t = tj
        out[j] = c
    return PathSample(g, tgrid, out, u0.divergence_free, u0)


# ------------------------------------------------------ Lipschitz probe


def wellposedness_probe(u0, eta, cfg=None, tgrid=None, battery=None, n_battery=3, seed=0, base=None):
    """Lipschitz ratios ``||u(u0 + eta phi) - u(u0)||_X / (eta ||e^{t Lap} phi||_X)``."""
    from .families import random_band

    cfg = cfg or MildConfig()
    tgrid = tgrid or TimeGrid(cfg.T)
    g = u0.grid
    if battery is None:
        battery = [random_band(g, 2 + i % 3, seed=seed + i) for i in range(n_battery)]
    base = base or solve_mild(u0, cfg, tgrid)
    rows = []
    for phi in battery:
        size = path_norm_X(heat_path(phi, tgrid)).x_norm
        if eta == 0 or size == 0:
            rows.append({"eta": eta, "ratio": 0.0, "phi_norm": size})
            continue
        pert = solve_mild(u0 + phi * eta, cfg, tgrid, c_b=base.c_b)
        diff = path_norm_X(pert.path - base.path).x_norm
        rows.append({"eta": eta, "ratio": diff / (eta * size), "phi_norm": size})
    return {"eta": eta, "rows": rows, "max_ratio": max(r["ratio"] for r in rows)}
