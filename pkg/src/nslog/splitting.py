"""Three-way splitting of initial data and the composite solve

``u = v + w + z``: ``v`` from the mild solver on the highest band, ``w`` from
the perturbed solver (drift ``v``) on a middle band, ``z`` from the Galerkin
system (drift ``v + w``) on the low remainder.  A weak-form residual against
a battery of smooth space-time test fields validates the sum.
"""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import make_interp_spline

from .duhamel import PathSample, TimeGrid, zero_path
from .errors import GateError, NSLogError, NumericalError, SplitError
from .galerkin import build_basis, energy_report, integrate_galerkin, _representatives
from .mild import MildConfig, solve_mild
from .perturbed import PerturbedConfig, solve_perturbed
from .jsonio import dumps
from .spaces import LINF, BaseSpace, BesovIndex, besov_norm_heat, default_j_max, log_besov_norm, smoothstep_chi
from .spectral import Field, dealias, ifft, leray_project

__all__ = [
    "SplitData",
    "CompositeConfig",
    "CompositeSolution",
    "split_initial_data",
    "solve_composite",
    "make_battery",
    "weak_residual",
]


@dataclass
class SplitData:
    v0: Field
    w0: Field
    z0: Field
    eps1: float
    eps2: float
    J1: int
    J2: int
    j_max: int
    norms: dict = field(default_factory=dict)

    def record(self):
        return {
            "eps1": self.eps1,
            "eps2": self.eps2,
            "J1": self.J1,
            "J2": self.J2,
            "j_max": self.j_max,
            "norms": self.norms,
        }


def _band(u0, chi, lo, hi):
    """Sum of blocks ``lo < j <= hi`` as ``(chi_hi - chi_lo) u0``; exact zeros outside the transition shells."""
    if hi <= lo:
        return u0.with_coeffs(np.zeros_like(u0.coeffs), True, True)
    return u0.with_coeffs(u0.coeffs * (chi[hi] - chi[lo]), True, True)


def split_initial_data(u0, eps1, eps2, r=0.5, T=1.0, j_low=1, j_max=None, mesh_J=120):
    """Descending scan over dyadic bands.

    ``J1`` drops from ``j_max`` while the tail above it keeps its logarithmic
    norm below ``eps1``; ``J2`` then drops from ``J1`` while the middle band
    keeps its ``B^{s_r,q_r}_{X_r}`` heat norm below ``eps2``.  Blocks at or
    below ``j_low`` always stay in ``z0``.
    """
    from .spaces import LogMesh

    if not (eps1 > 0 and eps2 > 0):
        raise SplitError(
            f"no admissible split for eps1={eps1}, eps2={eps2}: only an empty tail has zero norm",
            best_norms={"v0_log": 0.0, "w0_besov": 0.0},
        )
    g = u0.grid
    if j_max is None:
        j_max = max(default_j_max(u0), j_low)
    chi = np.stack([smoothstep_chi(g.kabs / 2.0**j) for j in range(j_max + 1)])
    mesh = LogMesh(T, J=mesh_J)
    idx = BesovIndex.from_r(r)
    xr = BaseSpace.Xr(r)

    def lognorm(f):
        return log_besov_norm(f, LINF, T, mesh=mesh, refine=False).value if np.any(f.coeffs) else 0.0

    def bnorm(f):
        if not np.any(f.coeffs):
            return 0.0
        return besov_norm_heat(f, idx, xr, t0=T, mesh=mesh, tol=1e-9).value

    J1, v_norm = j_max, 0.0
    while J1 > j_low:
        trial = lognorm(_band(u0, chi, J1 - 1, j_max))
        if not trial < eps1:
            break
        J1, v_norm = J1 - 1, trial
    J2, w_norm = J1, 0.0
    while J2 > j_low:
        trial = bnorm(_band(u0, chi, J2 - 1, J1))
        if not trial < eps2:
            break
        J2, w_norm = J2 - 1, trial
    v0 = _band(u0, chi, J1, j_max)
    w0 = _band(u0, chi, J2, J1)
    z0 = u0.with_coeffs(u0.coeffs * chi[J2], True, True)
    norms = {"v0_log": v_norm, "w0_besov": w_norm, "z0_l2": float(np.sqrt(g.volume * np.sum(np.abs(z0.coeffs) ** 2)))}
    return SplitData(v0, w0, z0, eps1, eps2, J1, J2, j_max, norms)


# ----------------------------------------------------------- composite


@dataclass
class CompositeConfig:
    T: float = 1.0
    r: float = 0.5
    J: int = 128
    gamma_grade: float = 2.0
    quad_order: int = 4
    eps1: float = 5e-4  # defaults place each band of three_band() in its own stage
    eps2: float = 1e-3
    j_low: int = 1
    n_galerkin: int = None
    n_cap: int = 240
    mild_tol: float = 1e-12
    perturbed_tol: float = 1e-11
    ode_tol: tuple = (1e-10, 1e-8)
    battery_size: int = 16
    seed: int = 0

    def tgrid(self):
        return TimeGrid(self.T, self.J, self.gamma_grade, self.quad_order)


@dataclass
class CompositeSolution:
    split: SplitData
    v: PathSample
    w: PathSample
    z: PathSample
    records: dict
    n_galerkin: int
    residual: dict = None

    @property
    def u(self):
        return self.v + self.w + self.z


def _default_n(z0, cap):
    """Basis members on shells up to twice the largest occupied ``|k|`` of ``z0``."""
    g = z0.grid
    mag = np.abs(z0.coeffs).max(axis=0)
    if mag.max() == 0:
        return 2
    kmax = float(g.kabs[mag > 1e-13 * mag.max()].max())
    per = 2 * (g.dim - 1)
    count = sum(per for k in _representatives(g) if math.sqrt(sum(v * v for v in k)) / g.period <= 2 * kmax + 1e-12)
    return max(2, min(count, cap))


def solve_composite(u0, cfg=None):
    """Split, then solve the three stages in sequence and sum them."""
    cfg = cfg or CompositeConfig()
    tg = cfg.tgrid()
    g = u0.grid
    records = {}
    mcfg = MildConfig(tol=cfg.mild_tol, T=cfg.T)
    split = split_initial_data(u0, cfg.eps1, cfg.eps2, cfg.r, cfg.T, cfg.j_low)
    records["split"] = split.record()

    def tagged(stage, fn):
        try:
            return fn()
        except GateError as err:
            kind = err.details.get("kind")
            err.stage = {"drift": "w-drift-gate", "data": "w-data-gate"}.get(kind, stage) if stage == "w" else f"{stage}-gate"
            raise
        except NumericalError as err:
            err.stage = f"{stage}-ode" if stage == "z" else f"{stage}-numerical"
            raise
        except NSLogError as err:
            err.stage = f"{stage}-{err.stage}"
            raise

    floor = 1e-14 * float(np.abs(u0.coeffs).max())

    def active(f):
        # bands holding only FFT roundoff of the data are skipped
        return float(np.abs(f.coeffs).max()) > floor

    if active(split.v0):
        vs = tagged("v", lambda: solve_mild(split.v0, mcfg, tg))
        v = vs.path
        records["v"] = vs.record()
    else:
        v = zero_path(g, tg)
        records["v"] = {"skipped": True}
    if active(split.w0):
        pcfg = PerturbedConfig(r=cfg.r, T=cfg.T, tol=cfg.perturbed_tol, max_halvings=0, seed=cfg.seed)
        ws = tagged("w", lambda: solve_perturbed(v, split.w0, pcfg, tg))
        w = ws.path
        records["w"] = ws.record()
    else:
        w = zero_path(g, tg)
        records["w"] = {"skipped": True}
    z0 = split.z0 if active(split.z0) else split.z0 * 0.0
    n = cfg.n_galerkin or _default_n(z0, cfg.n_cap)
    basis = build_basis(g, n)
    drift = v + w
    a = drift if np.any(drift.coeffs) else None
    st = tagged("z", lambda: integrate_galerkin(z0, a, basis, tgrid=tg, ode_tol=cfg.ode_tol))
    z = st.to_path()
    a1 = v if np.any(v.coeffs) else None
    a2 = w if np.any(w.coeffs) else None
    rep = energy_report(st, a1, a2, cfg.r)
    records["z"] = {"n": n, "stats": st.stats, "energy_C": rep["C"], "energy_holds": rep["holds"]}
    return CompositeSolution(split, v, w, z, records, n)


# -------------------------------------------------------- weak residual


def _bump(t, a, b):
    """Smooth bump on ``(a, b)`` and its derivative."""
    s = (2.0 * t - (a + b)) / (b - a)
    inside = np.abs(s) < 1
    eta = np.zeros_like(t)
    deta = np.zeros_like(t)
    si = s[inside]
    e = np.exp(-1.0 / (1.0 - si**2))
    eta[inside] = e
    deta[inside] = e * (-2.0 * si / (1.0 - si**2) ** 2) * (2.0 / (b - a))
    return eta, deta


def make_battery(grid, T, size=16, seed=0, kmax=3):
    """``[(psi, a, b), ...]``: divergence-free low-mode fields and bump supports."""
    rng = np.random.default_rng(seed)
    band = (grid.kabs * grid.period <= kmax) & (grid.kabs > 0) & grid.dealias_mask
    out = []
    for _ in range(size):
        phys = rng.standard_normal((grid.dim,) + grid.shape)
        f = Field(grid, np.fft.fftn(phys, axes=tuple(range(1, grid.dim + 1)), norm="forward") * band)
        psi = leray_project(dealias(f))
        psi = psi * (1.0 / max(np.sqrt(np.sum(np.abs(psi.coeffs) ** 2)), 1e-300))
        width = rng.uniform(0.2, 0.9) * T
        start = rng.uniform(0.05 * T, 0.95 * T - width)
        out.append((psi, start, start + width))
    return out


def weak_residual(u, battery_size=16, nonlinear=True, seed=0, battery=None, csv_path=None,
                  threshold=1e-4, gauss_points=256):
    """Normalized residual of the weak form against ``eta(t) psi(x)`` test fields.

    Residual of one member: ``|int eta' <u,psi> + eta <u,Lap psi> + eta <u (x) u, grad psi>|``
    divided by the sum of the three magnitudes.
    """
    g = u.grid
    T = u.tgrid.T
    battery = battery or make_battery(g, T, battery_size, seed)
    t = np.concatenate([[0.0], u.nodes]) if u.initial is not None else np.asarray(u.nodes)
    phys = u.physical()
    if u.initial is not None:
        phys = np.concatenate([u.initial.physical()[None], phys])
    d = g.dim
    dv = g.cell_volume
    x, w = np.polynomial.legendre.leggauss(gauss_points)
    rows = []
    for m, (psi, a, b) in enumerate(battery):
        pp = psi.physical()
        lap = ifft(g, -g.ksq * psi.coeffs)
        grad = ifft(g, 1j * g.k[:, None] * psi.coeffs[None])  # d_a psi_b
        A = np.einsum("jbp,bp->j", phys.reshape(len(t), d, -1), pp.reshape(d, -1)) * dv
        Bv = np.einsum("jbp,bp->j", phys.reshape(len(t), d, -1), lap.reshape(d, -1)) * dv
        if nonlinear:
            uu = phys.reshape(len(t), d, -1)
            Cv = np.einsum("jap,jbp,abp->j", uu, uu, grad.reshape(d, d, -1)) * dv
        else:
            Cv = np.zeros_like(A)
        tq = 0.5 * (b - a) * (x + 1.0) + a
        wq = 0.5 * (b - a) * w
        eta, deta = _bump(tq, a, b)
        parts = []
        for seq, weight in ((A, deta), (Bv, eta), (Cv, eta)):
            spline = make_interp_spline(t, seq, k=5)
            parts.append(float(np.dot(wq * weight, spline(tq))))
        total = abs(sum(parts))
        scale = sum(abs(p) for p in parts)
        rows.append({"member": m, "a": a, "b": b, "time": parts[0], "lap": parts[1], "adv": parts[2],
                     "residual": total / scale if scale > 0 else 0.0})
    worst = max(r["residual"] for r in rows)
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["member", "a", "b", "time_term", "laplacian_term", "advection_term", "residual"])
            for r in rows:
                wr.writerow([r["member"], repr(r["a"]), repr(r["b"]), repr(r["time"]), repr(r["lap"]),
                             repr(r["adv"]), repr(r["residual"])])
    return {"max_residual": worst, "rows": rows, "threshold": threshold, "passed": worst <= threshold,
            "battery_size": len(battery), "seed": seed}


def write_composite(sol, outdir):
    """Stage directories, split norms and the weak-residual CSV; returns artifact paths."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, path in (("v", sol.v), ("w", sol.w), ("z", sol.z), ("u", sol.u)):
        paths += path.save(out / name)
    rec = out / "stages.json"
    rec.write_text(dumps(sol.records) + "\n")
    paths.append(rec)
    return paths
