"""Three-dimensional smoke runs at M=16."""

import numpy as np

from nslog.duhamel import TimeGrid
from nslog.families import taylor_green_mixed
from nslog.galerkin import build_basis, coeff_c, integrate_galerkin
from nslog.mild import MildConfig, oracle_timestep, solve_mild
from nslog.spaces import LINF, log_besov_norm
from nslog.spectral import l2_norm, make_grid


def test_mild_3d_matches_rk4():
    g = make_grid(3, 16)
    tg = TimeGrid(1.0, 32)
    u0 = taylor_green_mixed(g, 0.01)
    s = solve_mild(u0, MildConfig(tol=1e-12), tg)
    assert max(s.contraction_ratios) < 1
    assert not s.path.final.check_invariants(1e-10)
    o = oracle_timestep(u0, 1.0, tgrid=tg)
    assert l2_norm(s.path.final - o.final) / l2_norm(o.final) < 1e-4
    assert log_besov_norm(u0, LINF, 1.0).value > 0


def test_galerkin_3d_two_members_per_pair():
    g = make_grid(3, 16)
    basis = build_basis(g, 12)
    cf = basis.coeffs().reshape(basis.n, -1)
    assert np.allclose(g.volume * (cf.conj() @ cf.T).real, np.eye(basis.n), atol=1e-12)
    c = coeff_c(basis)
    v = np.random.default_rng(1).standard_normal(basis.n)
    assert abs(np.einsum("ijk,i,j,k->", c, v, v, v)) < 1e-11
    st = integrate_galerkin(taylor_green_mixed(g, 0.01), None, basis, tgrid=TimeGrid(1.0, 16))
    assert np.all(np.diff(np.sum(st.g**2, axis=1)) <= 1e-14)
