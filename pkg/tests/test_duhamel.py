import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import beta

from nslog.duhamel import (
    PathSample,
    TimeGrid,
    bilinear_B,
    heat_path,
    lemma33_operator,
    logweight_convolution_check,
    make_time_grid,
    path_norm_V,
    path_norm_X,
    path_weighted,
    zero_path,
)
from nslog.estimates import portable_field
from nslog.families import taylor_green, taylor_green_mixed
from nslog.oracles import brute_duhamel
from nslog.spectral import from_physical, make_grid


def test_time_grid_nodes():
    assert np.allclose(make_time_grid(1, 4, 1, 4).nodes, [0.25, 0.5, 0.75, 1.0], rtol=0, atol=1e-15)
    assert np.allclose(make_time_grid(1, 4, 2, 4).nodes, [1 / 16, 1 / 4, 9 / 16, 1.0], rtol=0, atol=1e-15)
    fine = make_time_grid(1, 8, 2, 4).nodes
    for t in make_time_grid(1, 4, 2, 4).nodes:
        assert np.min(np.abs(fine - t)) <= 1e-15


def test_time_grid_quadrature_integrates_polynomials():
    tau, wt = make_time_grid(2.0, 16, 2, 4).quadrature()
    assert np.sum(wt * tau**7) == pytest.approx(2.0**8 / 8, rel=1e-13)


@pytest.mark.parametrize("args", [(0, 8), (1, 2), (1, 8, 0.5), (1, 8, 2, 12)])
def test_time_grid_rejects(args):
    with pytest.raises(ValueError):
        make_time_grid(*args)


def test_bilinear_zero(g16):
    tg = TimeGrid(1.0, 16)
    u = heat_path(portable_field(g16), tg)
    assert np.abs(bilinear_B(u, zero_path(g16, tg)).coeffs).max() == 0
    assert np.abs(bilinear_B(zero_path(g16, tg), u).coeffs).max() == 0


@given(seed=st.integers(0, 2**16), alpha=st.floats(-4, 4))
def test_bilinear_homogeneous(seed, alpha):
    g = make_grid(2, 16)
    tg = TimeGrid(1.0, 16)
    u = heat_path(portable_field(g, 3, seed), tg)
    v = heat_path(portable_field(g, 2, seed + 1), tg)
    ref = bilinear_B(u, v).coeffs
    lhs = bilinear_B(u * alpha, v).coeffs
    assert np.abs(lhs - alpha * ref).max() <= 1e-12 * np.abs(ref).max() * max(1, abs(alpha))


def test_bilinear_symmetrized(g16):
    tg = TimeGrid(1.0, 16)
    u = heat_path(portable_field(g16, 3, 1), tg)
    v = heat_path(portable_field(g16, 2, 2), tg)
    half = 0.5 * (bilinear_B(u, v).coeffs + bilinear_B(v, u).coeffs)
    assert np.abs(bilinear_B(u, v, True).coeffs - half).max() <= 1e-13


def test_taylor_green_is_nonlinearly_silent(g16):
    tg = TimeGrid(1.0, 32)
    u = heat_path(taylor_green(g16), tg)
    assert np.abs(bilinear_B(u, u).coeffs).max() <= 1e-14


def test_bilinear_matches_brute_oracle(g16):
    # Taylor-Green itself gives B = 0, so the mixed variant carries the comparison
    tg = TimeGrid(1.0, 128)
    u0 = taylor_green_mixed(g16)
    b = bilinear_B(heat_path(u0, tg), heat_path(u0, tg))
    j = int(np.argmin(np.abs(tg.nodes - 0.5)))
    for idx in (j, tg.J - 1):
        ref = brute_duhamel(u0, u0, tg.nodes[idx])
        assert np.abs(b.coeffs[idx] - ref).max() <= 1e-4 * np.abs(ref).max()


def test_path_norm_X_single_mode(g32):
    x = g32.x
    f = from_physical(g32, np.stack([np.cos(x[0]), np.zeros(g32.shape)]))
    tg = TimeGrid(1.0, 512)
    rep = path_norm_X(heat_path(f, tg))
    assert rep.x_norm == pytest.approx(1.3228152850, rel=2e-5)
    assert path_norm_X(zero_path(g32, tg)).x_norm == 0
    w = path_weighted(heat_path(f, TimeGrid(4.0, 8)), "x")[-1]
    assert w == pytest.approx(2 * math.sqrt(4.0) * math.exp(-4.0), rel=1e-13)


def test_path_norm_V_parts(g16):
    tg = TimeGrid(1.0, 32)
    rep = path_norm_V(heat_path(portable_field(g16, 2, 3), tg), 0.5)
    assert len(rep.v_parts) == 3 and all(p > 0 for p in rep.v_parts)
    assert rep.v_norm == pytest.approx(sum(rep.v_parts))


def test_path_save_load(tmp_path, g16):
    p = heat_path(portable_field(g16), TimeGrid(1.0, 8))
    p.save(tmp_path / "p")
    q = PathSample.load(tmp_path / "p")
    assert np.array_equal(p.coeffs, q.coeffs) and q.tgrid == p.tgrid
    assert np.array_equal(p.initial.coeffs, q.initial.coeffs)


def _direct_lhs(t, T):
    """Independent evaluation: exact antiderivative for the log tail, algebraic weight at tau = t."""
    L = lambda s: 2 + math.log(T / s)  # noqa: E731
    # int_0^a ds / (s L^2) = 1 / L(a); the remainder has a removable singularity at 0
    corr = lambda s: ((t - s) ** -0.5 - t**-0.5) / (s * L(s) ** 2)  # noqa: E731
    left = t**-0.5 / L(t / 2) + integrate.quad(corr, 0, t / 2, epsrel=1e-12, limit=200)[0]
    g = lambda s: 1.0 / (s * L(s) ** 2)  # noqa: E731
    right = integrate.quad(g, t / 2, t, weight="alg", wvar=(0, -0.5), epsrel=1e-12)[0]
    return left + right


@pytest.mark.parametrize("t", [1e-3, 0.1, 1.0])
def test_logweight_convolution_against_direct_quadrature(t):
    lhs, rhs, ratio = logweight_convolution_check(t, 1.0)
    assert lhs == pytest.approx(_direct_lhs(t, 1.0), rel=1e-6)
    assert ratio == pytest.approx(lhs / rhs)


def test_logweight_convolution_bounded_and_scale_invariant():
    ts = np.geomspace(1e-4, 1.0, 13)
    r1 = [logweight_convolution_check(t, 1.0)[2] for t in ts]
    r4 = [logweight_convolution_check(4 * t, 4.0)[2] for t in ts]
    assert max(r1) <= 10
    assert np.max(np.abs(np.array(r1) - r4)) <= 1e-6
    with pytest.raises(ValueError):
        logweight_convolution_check(2.0, 1.0)


def test_beta_operator():
    g, _, _ = lemma33_operator(lambda t: np.zeros_like(t), 0.25, 2.0)
    assert np.abs(g).max() == 0
    g, _, _ = lemma33_operator(lambda t: np.ones_like(t), 0.25, 2.0)
    assert beta(0.5, 0.25) == pytest.approx(5.2441, abs=1e-4)
    assert np.abs(g - beta(0.5, 0.25)).max() <= 1e-9
    g, _, _ = lemma33_operator(lambda t: np.ones_like(t), 1e-6, 2.0)
    assert np.abs(g - math.pi).max() <= 1e-4


def test_beta_operator_norm_independent_of_T():
    ratios = []
    for T in (0.5, 1.0, 2.0):
        _, a, b = lemma33_operator(lambda t, T=T: np.cos(3 * t / T) + 1.5, 0.25, 2.0, T=T)
        ratios.append(b / a)
    assert max(ratios) / min(ratios) - 1 <= 1e-6
