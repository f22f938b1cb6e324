import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from nslog.estimates import portable_field
from nslog.oracles import dense_xr
from nslog.spaces import (
    LINF,
    BaseSpace,
    BesovIndex,
    LogMesh,
    besov_norm_heat,
    besov_norm_lp,
    lemma13_constant,
    lemma13_embedding_check,
    log_besov_norm,
    lp_blocks,
    xr_norm,
    xr_norm_batch,
)
from nslog.spectral import from_physical, make_grid, sup_norm


def _mode(g, k1=0, k2=0):
    x = g.x
    return from_physical(g, np.stack([np.cos(k1 * x[0] + k2 * x[1]), np.zeros(g.shape)]))


def test_lp_single_mode_support(g32):
    blocks = lp_blocks(_mode(g32, 4), j_max=4)
    nz = [j for j, b in enumerate(blocks) if np.abs(b.coeffs).max() > 1e-14]
    assert set(nz) <= {2, 3} and nz


def test_lp_constant_in_low_block(g32):
    c = from_physical(g32, 3.0 * np.ones(g32.shape))
    blocks = lp_blocks(c, j_max=3)
    assert np.abs(blocks[0].coeffs - c.coeffs).max() == 0
    assert all(np.abs(b.coeffs).max() == 0 for b in blocks[1:])


@given(seed=st.integers(0, 2**16), j_max=st.integers(2, 4))
def test_lp_partition_of_unity(seed, j_max):
    g = make_grid(2, 32)
    # keep the support inside |k| <= 2**j_max, where the partition sums to one
    f = portable_field(g, min(6, int(2**j_max / math.sqrt(2))), seed)
    total = sum(b.coeffs for b in lp_blocks(f, j_max))
    assert np.linalg.norm(total - f.coeffs) <= 1e-12 * np.linalg.norm(f.coeffs)


def test_lp_rejects_unresolved_j_max(g16):
    with pytest.raises(ValueError):
        lp_blocks(portable_field(g16), j_max=8)


def test_besov_lp_single_mode(g32):
    rep = besov_norm_lp(_mode(g32, 4), BesovIndex(-1, math.inf), LINF)
    c, C = rep.parts["partition_bounds"]
    assert 2**-3 * c <= rep.value <= 2**-2 * C * (1 + 1e-12)
    assert rep.value == pytest.approx(0.25, abs=1e-12)


def test_besov_zero_and_homogeneity(g16):
    z = portable_field(g16) * 0.0
    idx = BesovIndex(-0.5, 2.0)
    assert besov_norm_lp(z, idx, LINF).value == 0
    assert besov_norm_heat(z, idx, LINF).value == 0
    assert log_besov_norm(z, LINF).value == 0
    f = portable_field(g16, 3, 4)
    assert besov_norm_lp(f * 2, idx, LINF).value == pytest.approx(2 * besov_norm_lp(f, idx, LINF).value, rel=1e-14)


def test_heat_form_single_mode(g32):
    rep = besov_norm_heat(_mode(g32, 0, 1), BesovIndex(-1, math.inf), LINF, t0=1.0)
    oracle = -minimize_scalar(lambda t: -math.sqrt(t) * math.exp(-t), bounds=(0, 1), method="bounded").fun
    assert oracle == pytest.approx((2 * math.e) ** -0.5, rel=1e-9)
    assert rep.parts["high"] == pytest.approx(oracle, rel=1e-9)
    assert rep.parts["high"] == pytest.approx(0.428882, abs=1e-6)
    assert rep.parts["t_star"] == pytest.approx(0.5, abs=1e-6)


def test_log_norm_single_mode(g32):
    env = lambda t: math.sqrt(t) * (2 - math.log(t)) * math.exp(-t)  # noqa: E731
    res = minimize_scalar(lambda t: -env(t), bounds=(1e-6, 1), method="bounded", options={"xatol": 1e-12})
    rep = log_besov_norm(_mode(g32, 1), LINF, 1.0)
    assert rep.value == pytest.approx(-res.fun, rel=1e-10)
    assert rep.value == pytest.approx(1.3228, abs=1e-4)
    assert rep.parts["t_star"] == pytest.approx(0.2167, abs=1e-3)


@given(seed=st.integers(0, 2**16), T1=st.floats(0.1, 1.0), factor=st.floats(1.0, 8.0))
def test_log_norm_horizon_scaling(seed, T1, factor):
    f = portable_field(make_grid(2, 16), 3, seed)
    T2 = T1 * factor
    n1 = log_besov_norm(f, LINF, T1).value
    n2 = log_besov_norm(f, LINF, T2).value
    assert n1 <= n2 * (1 + 1e-9)
    assert n2 <= math.sqrt(T2 / T1) * n1 * (1 + 1e-9)


def test_lemma13_constant_value():
    assert lemma13_constant(2.0) == pytest.approx(1 / math.sqrt(2), rel=1e-15)
    with pytest.raises(ValueError):
        lemma13_constant(1.0)


def test_embedding_zero(g16):
    rep = lemma13_embedding_check(portable_field(g16) * 0.0, LINF, 2.0)
    assert rep["lhs"] == 0 and rep["holds"]


@pytest.mark.parametrize("q", [1.5, 2.0, 4.0])
def test_embedding_ratio_within_constant(g16, q):
    mesh = LogMesh(1.0)
    for s in range(20):
        rep = lemma13_embedding_check(portable_field(g16, 1 + s % 4, 100 + s), LINF, q, mesh=mesh)
        assert rep["holds"]
        assert rep["ratio"] <= rep["constant"] * (1 + 1e-6)


def test_xr_constant_and_sup_bound(g16):
    c = from_physical(g16, -2.5 * np.ones(g16.shape))
    assert xr_norm(c, 0.5).value == pytest.approx(2.5, rel=1e-10)
    for s in range(5):
        f = portable_field(g16, 1 + s % 3, s)
        assert xr_norm(f, 0.5).value <= sup_norm(f) * (1 + 1e-12)


def test_xr_matches_dense_svd():
    g = make_grid(2, 8)
    m = np.abs(np.random.default_rng(7).standard_normal((1,) + g.shape))
    val = float(xr_norm_batch(m, g, 0.5, tol=1e-14)[0][0])
    assert val == pytest.approx(dense_xr(m[0], 0.5), rel=1e-8)


def test_xr_report_is_reproducible(g16):
    f = portable_field(g16, 3, 5)
    a, b = xr_norm(f, 0.5), xr_norm(f, 0.5)
    assert a.value == b.value and a.seed == b.seed and a.iterations == b.iterations


@given(seed=st.integers(0, 2**16))
def test_xr_monotone_in_r(seed):
    f = portable_field(make_grid(2, 16), 3, seed)
    vals = [xr_norm(f, r, tol=1e-12).value for r in (0.25, 0.5, 0.75)]
    assert vals[0] >= vals[1] * (1 - 1e-9) and vals[1] >= vals[2] * (1 - 1e-9)


def test_xr_space_label():
    assert BaseSpace.Xr(0.5).label != BaseSpace.Lp(2).label
    with pytest.raises(ValueError):
        BaseSpace.Xr(1.0)
