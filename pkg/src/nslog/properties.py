"""Registry of module invariants, runnable as one suite.

Every check returns a :class:`CheckResult`; ``run_suite`` executes the
registry (optionally filtered by module) and writes one CSV row per check.
"""

import csv
import math
import time
from dataclasses import dataclass

import numpy as np

__all__ = ["CheckResult", "REGISTRY", "MODULES", "register", "run_suite", "write_csv"]

MODULES = (
    "spectral_core",
    "function_spaces",
    "duhamel",
    "mild_solver",
    "perturbed_solver",
    "galerkin_solver",
    "splitting_driver",
)


@dataclass
class CheckResult:
    module: str
    name: str
    passed: bool
    value: float
    bound: float
    seconds: float = 0.0
    detail: str = ""

    def row(self, timings=False):
        row = [self.module, self.name, "pass" if self.passed else "fail", f"{self.value:.17g}", f"{self.bound:.17g}"]
        return row + ([f"{self.seconds:.3f}"] if timings else []) + [self.detail]


REGISTRY = []


def register(module, name):
    if module not in MODULES:
        raise ValueError(f"unknown module {module!r}")

    def deco(fn):
        REGISTRY.append((module, name, fn))
        return fn

    return deco


def _le(value, bound, detail=""):
    return bool(value <= bound), float(value), float(bound), detail


def run_suite(modules=None, csv_path=None, progress=None):
    """Run registered checks; ``modules`` restricts to a subset of module names."""
    if modules:
        unknown = set(modules) - set(MODULES)
        if unknown:
            raise ValueError(f"unknown module filter {sorted(unknown)}")
    results = []
    for module, name, fn in REGISTRY:
        if modules and module not in modules:
            continue
        start = time.perf_counter()
        try:
            passed, value, bound, detail = fn()
        except Exception as err:  # a crashing check is reported, not propagated
            passed, value, bound, detail = False, math.nan, math.nan, f"{type(err).__name__}: {err}"
        res = CheckResult(module, name, passed, value, bound, time.perf_counter() - start, detail)
        results.append(res)
        if progress is not None:
            progress(res)
    if csv_path is not None:
        write_csv(results, csv_path)
    return results


def write_csv(results, path, timings=False):
    """One row per check; wall times are left out unless asked for, keeping reruns byte-identical."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["module", "check", "status", "value", "bound"] + (["seconds"] if timings else []) + ["detail"])
        for r in results:
            w.writerow(r.row(timings))


# ------------------------------------------------------------ fixtures

_MEMO = {}


def _memo(key, fn):
    if key not in _MEMO:
        _MEMO[key] = fn()
    return _MEMO[key]


def _grid(M=16, dim=2):
    from .spectral import make_grid

    return _memo(("grid", dim, M), lambda: make_grid(dim, M))


def _rel(a, b):
    return float(np.abs(a - b).max() / max(np.abs(b).max(), 1e-300))


# -------------------------------------------------------- spectral_core


@register("spectral_core", "fft round trip")
def _roundtrip():
    from .spectral import from_physical

    g = _grid()
    x = np.random.default_rng(1).standard_normal((2,) + g.shape)
    return _le(_rel(from_physical(g, x).physical(), x), 1e-13)


@register("spectral_core", "heat semigroup law and contraction")
def _semigroup():
    from .estimates import portable_field
    from .spectral import heat_semigroup, l2_norm

    f = portable_field(_grid(), 4, 2)
    lhs = heat_semigroup(heat_semigroup(f, 0.13), 0.29).coeffs
    law = _rel(lhs, heat_semigroup(f, 0.42).coeffs)
    grow = max(l2_norm(heat_semigroup(f, t)) - l2_norm(f) for t in (0.0, 1e-3, 0.5, 3.0))
    return _le(max(law, grow), 1e-13)


@register("spectral_core", "Leray idempotent, self-adjoint, divergence free")
def _leray():
    from .spectral import divergence, from_physical, l2_inner, leray_project

    g = _grid()
    rng = np.random.default_rng(3)
    f = from_physical(g, rng.standard_normal((2,) + g.shape))
    h = from_physical(g, rng.standard_normal((2,) + g.shape))
    pf = leray_project(f)
    idem = _rel(leray_project(pf).coeffs, pf.coeffs)
    sa = abs(l2_inner(pf, h) - l2_inner(f, leray_project(h))) / abs(l2_inner(f, h))
    div = float(np.abs(divergence(pf).coeffs).max())
    return _le(max(idem, sa, div), 1e-13)


@register("spectral_core", "advection skew symmetry")
def _skew():
    from .estimates import portable_field
    from .spectral import ifft

    g = _grid()
    u = portable_field(g, 3, 5)
    up = u.physical()
    grad = ifft(g, 1j * g.k[:, None] * u.coeffs[None])  # d_a u_b
    val = float(np.einsum("ap,abp,bp->", up.reshape(2, -1), grad.reshape(2, 2, -1), up.reshape(2, -1)))
    return _le(abs(val) * g.cell_volume, 1e-11)


@register("spectral_core", "sqrt(t) scaling band of the P div semigroup")
def _pdiv():
    from .estimates import pdiv_scaling

    band = pdiv_scaling(_grid(32), np.geomspace(1e-3, 1e-1, 9))["band"]
    return _le(band, 3.0, "max/min over t in [1e-3, 1e-1]")


# ------------------------------------------------------ function_spaces


@register("function_spaces", "LP partition reconstruction")
def _lp():
    from .estimates import portable_field
    from .spaces import lp_blocks

    f = portable_field(_grid(32), 6, 4)
    total = sum(b.coeffs for b in lp_blocks(f))
    return _le(_rel(total, f.coeffs), 1e-12)


@register("function_spaces", "homogeneity and triangle inequality")
def _homog():
    from .estimates import portable_field
    from .spaces import LINF, BesovIndex, besov_norm_heat, besov_norm_lp, log_besov_norm, xr_norm

    g = _grid()
    f, h = portable_field(g, 3, 8), portable_field(g, 2, 9)
    hom = tri = 0.0
    norms = [
        lambda x: besov_norm_lp(x, BesovIndex(-0.5, 2.0), LINF).value,
        lambda x: besov_norm_heat(x, BesovIndex(-0.5, 2.0), LINF).value,
        lambda x: log_besov_norm(x, LINF).value,
        lambda x: xr_norm(x, 0.5, tol=1e-13).value,
    ]
    for n in norms:
        nf = n(f)
        hom = max(hom, abs(n(f * 2.5) - 2.5 * nf) / nf)
        tri = max(tri, (n(f + h) - nf - n(h)) / nf)
    if tri > 1e-10:
        return False, tri, 1e-10, "triangle inequality"
    return _le(hom, 1e-8, "homogeneity, relative")


@register("function_spaces", "X_r matches dense SVD")
def _xr_dense():
    from .oracles import dense_xr
    from .spaces import xr_norm_batch
    from .spectral import make_grid

    g = make_grid(2, 8)
    m = np.abs(np.random.default_rng(0).standard_normal((1,) + g.shape))
    val = float(xr_norm_batch(m, g, 0.5, tol=1e-14)[0][0])
    return _le(abs(val - dense_xr(m[0], 0.5)) / val, 1e-8)


@register("function_spaces", "X_r monotone in r, Rayleigh quotients nondecreasing")
def _xr_mono():
    from .estimates import portable_field
    from .spaces import xr_norm, xr_norm_batch
    from .spectral import magnitude

    g = _grid()
    f = portable_field(g, 3, 11)
    vals = [xr_norm(f, r, tol=1e-13).value for r in (0.2, 0.5, 0.8)]
    mono = max(vals[1] - vals[0], vals[2] - vals[1])
    _, _, hist = xr_norm_batch(magnitude(f.physical(), g)[None], g, 0.5, tol=1e-13, history=True)
    steps = np.diff(np.asarray(hist[0]))
    drop = float(-steps.min()) if steps.size else 0.0
    return _le(max(mono - 1e-10, drop - 1e-14), 0.0)


@register("function_spaces", "log-Besov embedding constant")
def _embed():
    from .estimates import portable_field
    from .spaces import LINF, lemma13_embedding_check

    worst = 0.0
    for q in (1.5, 2.0, 4.0):
        for s in range(5):
            c = lemma13_embedding_check(portable_field(_grid(), 1 + s % 4, 40 + s), LINF, q)
            worst = max(worst, c["ratio"] / c["constant"])
    return _le(worst, 1 + 1e-6, "ratio / (2^(1-q)/(q-1))^(1/q)")


@register("function_spaces", "log/Besov comparison constant stable across resolutions")
def _logcmp():
    from .estimates import portable_field
    from .spaces import LINF, BesovIndex, besov_norm_heat, log_besov_norm

    consts = []
    for M in (16, 32):
        g = _grid(M)
        c = 0.0
        for s in range(4):
            f = portable_field(g, 1 + s, 60 + s)
            c = max(c, log_besov_norm(f, LINF).value / besov_norm_heat(f, BesovIndex(-0.5, math.inf), LINF).value)
        consts.append(c)
    return _le(abs(consts[1] / consts[0] - 1), 0.25, f"constants {consts}")


@register("function_spaces", "heat/LP equivalence band")
def _band():
    from .estimates import heat_lp_band
    from .spaces import BesovIndex

    worst = 0.0
    for idx in (BesovIndex(-0.5, 2.0), BesovIndex(-0.5, math.inf)):
        a, b = heat_lp_band(_grid(16), idx), heat_lp_band(_grid(32), idx)
        c = max(max(a), 1 / min(a), max(b), 1 / min(b))
        if c > 10:
            return False, c, 10.0, "band exceeds 10"
        worst = max(worst, abs(max(b) / max(a) - 1), abs(min(b) / min(a) - 1))
    return _le(worst, 0.25, "relative drift of band ends from M=16 to M=32")


# --------------------------------------------------------------- duhamel


@register("duhamel", "bilinear_B matches brute oracle")
def _oracle():
    from .duhamel import TimeGrid, bilinear_B, heat_path
    from .families import taylor_green_mixed
    from .oracles import brute_duhamel

    g = _grid()
    u0 = taylor_green_mixed(g)
    b = bilinear_B(heat_path(u0, TimeGrid(1.0, 128)), heat_path(u0, TimeGrid(1.0, 128)))
    ref = brute_duhamel(u0, u0, 1.0)
    return _le(_rel(b.coeffs[-1], ref), 1e-4)


@register("duhamel", "bilinear bounds on the logarithmic path space")
def _bil_x():
    from .duhamel import TimeGrid
    from .estimates import x_space_estimates

    a = x_space_estimates(_grid(), TimeGrid(1.0, 64))
    b = x_space_estimates(_grid(), TimeGrid(1.0, 128))
    drift = max(abs(max(b[k]) / max(a[k]) - 1) for k in ("x_bound", "log_bound"))
    if max(b["weak_bound"]) > 1 or not all(b["vanish"]):
        return False, max(b["weak_bound"]), 1.0, "weak-limit bound violated"
    return _le(drift, 0.25, f"C_X={max(b['x_bound']):.4g} C_log={max(b['log_bound']):.4g}")


@register("duhamel", "bilinear bounds with a sqrt(t)-bounded drift")
def _bil_drift():
    from .duhamel import TimeGrid
    from .estimates import drift_space_estimates

    a = drift_space_estimates(_grid(), TimeGrid(1.0, 64), n_pairs=12)
    b = drift_space_estimates(_grid(), TimeGrid(1.0, 128), n_pairs=12)
    drift = max(abs(max(b[k]) / max(a[k]) - 1) for k in ("lq_xr", "besov", "sup_xr", "sup_linf"))
    return _le(drift, 0.25, " ".join(f"{k}={max(b[k]):.4g}" for k in ("lq_xr", "besov", "sup_xr", "sup_linf")))


@register("duhamel", "log-weight convolution ratio bounded and scale invariant")
def _logconv():
    from .duhamel import logweight_convolution_check

    ts = np.geomspace(1e-4, 1.0, 9)
    ratios = [logweight_convolution_check(t, 1.0)[2] for t in ts]
    scaled = [logweight_convolution_check(4 * t, 4.0)[2] for t in ts]
    if max(abs(a - b) for a, b in zip(ratios, scaled)) > 1e-6:
        return False, max(ratios), 10.0, "not scale invariant"
    return _le(max(ratios), 10.0)


@register("duhamel", "Beta-kernel operator identity and T independence")
def _beta_op():
    from scipy.special import beta

    from .duhamel import lemma33_operator

    worst = 0.0
    for th in (0.1, 0.25, 0.4):
        g, _, _ = lemma33_operator(lambda t: np.ones_like(t), th, 2.0)
        worst = max(worst, float(np.abs(g - beta(0.5, 0.5 - th)).max()))
    consts = []
    for T in (0.5, 1.0, 2.0):
        f = lambda t, T=T: np.cos(3 * t / T) + 1.5  # noqa: E731
        _, n_in, n_out = lemma33_operator(f, 0.25, 2.0, T=T)
        consts.append(n_out / n_in)
    spread = max(consts) / min(consts) - 1
    return _le(max(worst, spread), 1e-6, f"Beta error {worst:.2e}, T-spread {spread:.2e}")


# ----------------------------------------------------------- mild_solver


def _mild_tg():
    from .duhamel import TimeGrid
    from .families import taylor_green_mixed
    from .mild import MildConfig, solve_mild

    def make():
        g = _grid()
        return solve_mild(taylor_green_mixed(g, 0.01), MildConfig(tol=1e-13), TimeGrid(1.0, 64))

    return _memo("mild_tg", make)


@register("mild_solver", "contraction within the gated ball")
def _contr():
    s = _mild_tg()
    bound = 2 * s.c_b * 2 * s.ball_radius_max
    return _le(max(s.contraction_ratios), min(bound, 1.0), "ratio vs 2 C_B (||u|| + ||v||)")


@register("mild_solver", "residual and divergence")
def _res():
    s = _mild_tg()
    g = s.path.grid
    div = float(np.abs(np.einsum("a...,ja...->j...", g.k, s.path.coeffs)).max())
    return _le(max(s.residual, div / np.abs(s.path.coeffs).max() * 1e-4), 1e-8, f"divergence {div:.2e}")


@register("mild_solver", "agreement with RK4 oracle")
def _rk4():
    from .mild import oracle_timestep
    from .spectral import l2_norm

    s = _mild_tg()
    o = oracle_timestep(s.path.initial, 1.0, tgrid=s.path.tgrid)
    return _le(l2_norm(s.path.final - o.final) / l2_norm(o.final), 1e-4)


@register("mild_solver", "quadratic first correction")
def _quad():
    from .duhamel import TimeGrid
    from .families import taylor_green_mixed
    from .mild import MildConfig, solve_mild

    g = _grid()
    tg = TimeGrid(1.0, 64)
    deltas = (0.005, 0.01, 0.02)
    corr = [solve_mild(taylor_green_mixed(g, d), MildConfig(tol=1e-12), tg).first_correction for d in deltas]
    slope = np.polyfit(np.log(deltas), np.log(corr), 1)[0]
    return _le(-slope, -1.9, f"fitted exponent {slope:.4f}")


@register("mild_solver", "vanishing weighted norm at t -> 0")
def _van():
    from .duhamel import path_norm_X

    flag = path_norm_X(_mild_tg().path).limit_flags["x"]
    return bool(flag), float(flag), 1.0, ""


# ------------------------------------------------------ perturbed_solver


def _drift():
    from .duhamel import TimeGrid, heat_path
    from .families import taylor_green_mixed

    return _memo("drift", lambda: heat_path(taylor_green_mixed(_grid(), 1.0), TimeGrid(1.0, 64)))


@register("perturbed_solver", "a = 0 reduces to the mild solver")
def _a0():
    from .duhamel import TimeGrid, path_norm_X, zero_path
    from .families import taylor_green_mixed
    from .mild import MildConfig, solve_mild
    from .perturbed import PerturbedConfig, solve_perturbed

    g = _grid()
    tg = TimeGrid(1.0, 64)
    u0 = taylor_green_mixed(g, 0.01)
    p = solve_perturbed(zero_path(g, tg), u0, PerturbedConfig(tol=1e-13), tg)
    m = solve_mild(u0, MildConfig(tol=1e-13), tg)
    return _le(path_norm_X(p.path - m.path).x_norm / path_norm_X(m.path).x_norm, 1e-10)


@register("perturbed_solver", "resolvent amplification and Neumann decay")
def _resolvent():
    from .duhamel import heat_path
    from .estimates import portable_field
    from .perturbed import PerturbedConfig, _v, drift_gate, invert_I_minus_L

    a = _drift()
    cfg = PerturbedConfig()
    gate, _ = drift_gate(a, cfg)
    if gate > 0.5:
        return False, gate, 0.5, "drift gate failed"
    amp = decay = 0.0
    for s in range(4):
        rhs = heat_path(portable_field(a.grid, 1 + s % 3, 70 + s), a.tgrid)
        x, hist = invert_I_minus_L(a, rhs, cfg)
        amp = max(amp, _v(x, cfg) / _v(rhs, cfg))
        decay = max(decay, max(h1 / h0 for h0, h1 in zip(hist, hist[1:]) if h0 > 0))
    if amp > 2.2:
        return False, amp, 2.2, "amplification"
    return _le(decay, 0.55, f"gate {gate:.3g}, amplification {amp:.4g}")


@register("perturbed_solver", "heat flow membership constant C0 stable")
def _c0():
    from .duhamel import TimeGrid, heat_path, path_norm_V
    from .estimates import portable_field
    from .spaces import BaseSpace, BesovIndex, besov_norm_heat

    out = []
    for M in (16, 32):
        g = _grid(M)
        c = 0.0
        for s in range(3):
            f = portable_field(g, 1 + s, 80 + s)
            den = besov_norm_heat(f, BesovIndex.from_r(0.5), BaseSpace.Xr(0.5), tol=1e-9).value
            c = max(c, path_norm_V(heat_path(f, TimeGrid(1.0, 64)), 0.5, 1e-9).v_norm / den)
        out.append(c)
    return _le(abs(out[1] / out[0] - 1), 0.25, f"C0 {out}")


@register("perturbed_solver", "solution class flags")
def _flags():
    from .duhamel import TimeGrid
    from .families import taylor_green_mixed, rotated_mode
    from .mild import MildConfig, solve_mild
    from .perturbed import PerturbedConfig, solve_perturbed

    g = _grid()
    tg = TimeGrid(1.0, 64)
    v = solve_mild(taylor_green_mixed(g, 0.05), MildConfig(), tg).path
    s = solve_perturbed(v, rotated_mode(g, (2, 1), 1e-3), PerturbedConfig(), tg)
    ok = all(s.limit_flags.values()) and all(np.isfinite(s.v_norm_components))
    return ok, max(s.contraction_ratios or [0.0]), 1.0, f"flags {s.limit_flags}"


# ------------------------------------------------------- galerkin_solver


def _basis():
    from .galerkin import build_basis

    return _memo("basis", lambda: build_basis(_grid(), 60))


@register("galerkin_solver", "basis orthonormal and divergence free")
def _ortho():
    b = _basis()
    coeffs = b.coeffs()
    c = coeffs.reshape(b.n, -1)
    gram = b.grid.volume * (c.conj() @ c.T).real
    div = np.abs(np.einsum("a...,na...->n...", b.grid.k, coeffs)).max()
    return _le(max(float(np.abs(gram - np.eye(b.n)).max()), float(div)), 1e-12)


@register("galerkin_solver", "cubic cancellation")
def _cubic():
    from . import _kernels
    from .galerkin import coeff_c

    c = coeff_c(_basis())
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(20):
        g = rng.standard_normal(c.shape[0])
        worst = max(worst, abs(float(np.dot(g, _kernels.cubic_form(c, g)))) / float(np.dot(g, g)) ** 1.5)
    return _le(worst, 1e-11)


@register("galerkin_solver", "energy identity without drift")
def _eident():
    from .duhamel import TimeGrid
    from .estimates import portable_field
    from .galerkin import energy_report, integrate_galerkin

    st = integrate_galerkin(portable_field(_grid(), 2, 90, 0.05), None, _basis(), tgrid=TimeGrid(1.0, 64))
    rep = energy_report(st)
    return _le(rep["energy_identity_defect"] / rep["E0"], 1e-6, "relative to E0 at rtol 1e-8")


@register("galerkin_solver", "energy inequality constant stable under n doubling")
def _eineq():
    from .duhamel import PathSample, TimeGrid
    from .estimates import portable_field
    from .families import taylor_green_mixed
    from .galerkin import build_basis, energy_report, integrate_galerkin

    g = _grid()
    tg = TimeGrid(1.0, 64)
    a = taylor_green_mixed(g, 10.0)
    A = PathSample(g, tg, np.broadcast_to(a.coeffs, (tg.J,) + a.coeffs.shape).copy(), True, a)
    u0 = portable_field(g, 2, 91, 0.1)
    Cs = []
    for n in (40, 80):
        rep = energy_report(integrate_galerkin(u0, A, build_basis(g, n), tgrid=tg), a1=A)
        if not rep["holds"] or not rep["C"] > 0:
            return False, rep["C"], math.nan, "fit failed"
        Cs.append(rep["C"])
    return _le(abs(Cs[1] / Cs[0] - 1), 0.25, f"C {Cs}")


@register("galerkin_solver", "drift pairing bounds")
def _dpair():
    from .estimates import drift_pairing_constants

    c = drift_pairing_constants(_grid())
    return _le(max(max(c["c_inf"]), max(c["c_xr"]) / 2 ** 0.25), 1.0 + 1e-12, "measured / analytic constant")


@register("galerkin_solver", "convergence to the mild solution")
def _gconv():
    from .galerkin import build_basis, integrate_galerkin
    from .spectral import l2_norm

    s = _mild_tg()
    errs = []
    for n in (10, 20, 40):
        st = integrate_galerkin(s.path.initial, None, build_basis(s.path.grid, n), tgrid=s.path.tgrid)
        errs.append(l2_norm(st.to_path().final - s.path.final) / l2_norm(s.path.final))
    growth = max(b / a for a, b in zip(errs, errs[1:]))
    return _le(growth, 1.1, f"errors {errs}")


# ------------------------------------------------------ splitting_driver


def _composite():
    from .families import three_band
    from .splitting import CompositeConfig, solve_composite

    return _memo("composite", lambda: solve_composite(three_band(_grid(32)), CompositeConfig(J=32, n_galerkin=80)))


@register("splitting_driver", "reassembly exact")
def _reassembly():
    s = _composite().split
    u0 = s.v0.coeffs + s.w0.coeffs + s.z0.coeffs
    from .families import three_band

    return _le(float(np.abs(u0 - three_band(_grid(32)).coeffs).max()), 1e-12)


@register("splitting_driver", "monotone epsilon feasibility")
def _monotone():
    from .errors import SplitError
    from .families import three_band
    from .splitting import split_initial_data

    u0 = three_band(_grid(32))
    feas = []
    for e in (0.0, 1e-5, 1e-3, 1e-1):
        try:
            split_initial_data(u0, e, e)
            feas.append(True)
        except SplitError:
            feas.append(False)
    mono = all(b or not a for a, b in zip(feas, feas[1:]))
    return mono, float(sum(feas)), 3.0, f"feasible {feas}"


@register("splitting_driver", "composite weak residual")
def _weak():
    from .splitting import weak_residual

    sol = _composite()
    nontrivial = all(np.any(p.coeffs) for p in (sol.v, sol.w, sol.z))
    res = weak_residual(sol.u)["max_residual"]
    return (res <= 1e-4 and nontrivial), res, 1e-4, f"stages non-trivial: {nontrivial}"


@register("splitting_driver", "negative control rejected")
def _neg():
    from .splitting import weak_residual

    u = _composite().u
    frozen = u.with_coeffs(np.broadcast_to(u.coeffs[-1], u.coeffs.shape).copy())
    res = weak_residual(frozen)["max_residual"]
    return bool(res >= 1e-2), res, 1e-2, "residual must be O(1)"
