import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nslog.errors import GridMismatchError
from nslog.estimates import portable_field, random_tensor
from nslog.spectral import (
    TensorField,
    divergence,
    from_physical,
    gradient,
    heat_semigroup,
    l2_inner,
    leray_project,
    make_grid,
    pdiv_semigroup,
    sup_norm,
    tensor_divergence,
    tensor_product,
)


def _vec(g, comps):
    return from_physical(g, np.stack(comps))


def test_make_grid_shapes():
    g = make_grid(2, 16, 1)
    assert g.shape == (16, 16)
    assert sorted(set(g.index[0].ravel())) == list(range(-8, 8))
    assert make_grid(3, 8, 1).shape == (8, 8, 8)


@pytest.mark.parametrize("args", [(2, 7, 1), (4, 16, 1), (2, 16, 0.0)])
def test_make_grid_rejects(args):
    with pytest.raises(ValueError):
        make_grid(*args)


def test_heat_single_mode(g16):
    x = g16.x
    f = _vec(g16, [np.cos(x[1]), np.zeros(g16.shape)])
    assert np.array_equal(heat_semigroup(f, 0.0).coeffs, f.coeffs)
    amp = heat_semigroup(f, 0.5).physical()[0].max()
    assert amp == pytest.approx(math.exp(-0.5), abs=1e-13)
    assert amp == pytest.approx(0.606531, abs=1e-6)


def test_heat_semigroup_law(g16):
    f = from_physical(g16, np.random.default_rng(0).standard_normal((2,) + g16.shape))
    a = heat_semigroup(heat_semigroup(f, 0.1), 0.2).coeffs
    assert np.abs(a - heat_semigroup(f, 0.3).coeffs).max() <= 1e-13


def test_heat_rejects_negative_time(g16):
    with pytest.raises(ValueError):
        heat_semigroup(portable_field(g16), -0.1)


def test_leray_gradient_and_divfree(g16):
    x = g16.x
    grad_phi = _vec(g16, [np.cos(x[0]), np.zeros(g16.shape)])
    assert sup_norm(leray_project(grad_phi)) <= 1e-13
    f = _vec(g16, [np.sin(x[1]), np.sin(x[0])])
    assert np.abs(leray_project(f).coeffs - f.coeffs).max() <= 1e-13


def test_leray_matches_hand_projection():
    g = make_grid(2, 8)
    rng = np.random.default_rng(2)
    f = from_physical(g, rng.standard_normal((2,) + g.shape))
    out = np.zeros_like(f.coeffs)
    for i in range(8):
        for j in range(8):
            k = g.k[:, i, j]
            kk = k @ k
            # the mean mode is removed: projection onto mean-zero fields
            P = np.eye(2) - np.outer(k, k) / kk if kk else np.zeros((2, 2))
            out[:, i, j] = P @ f.coeffs[:, i, j]
    assert np.abs(leray_project(f).coeffs - out).max() <= 1e-14


def test_divergence_examples(g16):
    x = g16.x
    assert np.abs(divergence(_vec(g16, [np.ones(g16.shape), 2 * np.ones(g16.shape)])).coeffs).max() == 0
    d = divergence(_vec(g16, [np.sin(x[0]), np.zeros(g16.shape)])).physical()[0]
    assert np.abs(d - np.cos(x[0])).max() <= 1e-13
    rnd = leray_project(from_physical(g16, np.random.default_rng(1).standard_normal((2,) + g16.shape)))
    assert sup_norm(divergence(rnd)) <= 1e-12


def test_tensor_product_examples(g16):
    x = g16.x
    one = _vec(g16, [np.ones(g16.shape), np.zeros(g16.shape)])
    T = tensor_product(one, one).physical()
    assert np.abs(T[0, 0] - 1).max() <= 1e-14 and np.abs(T[1:]).max() <= 1e-14 and np.abs(T[0, 1]).max() <= 1e-14
    c = _vec(g16, [np.cos(x[0]), np.zeros(g16.shape)])
    S = tensor_product(c, c).physical()[0, 0]
    assert np.abs(S - (0.5 + 0.5 * np.cos(2 * x[0]))).max() <= 1e-13


def test_symmetrized_product_commutes(g16):
    a, u = portable_field(g16, 3, 1), portable_field(g16, 2, 2)
    assert np.array_equal(tensor_product(a, u, True).coeffs, tensor_product(u, a, True).coeffs)


def test_pdiv_examples(g16):
    Z = TensorField(g16, np.zeros((2, 2) + g16.shape, complex))
    assert sup_norm(pdiv_semigroup(Z, 0.1)) == 0
    S = random_tensor(g16, g16.kmax_dealias, 3)
    out = pdiv_semigroup(S, 0.1)
    assert sup_norm(divergence(out)) <= 1e-12
    ref = heat_semigroup(leray_project(tensor_divergence(S)), 0.1)
    assert np.abs(out.coeffs - ref.coeffs).max() <= 1e-13


def test_grid_mismatch(g16, g32):
    with pytest.raises(GridMismatchError):
        portable_field(g16) + portable_field(g32)


@given(seed=st.integers(0, 2**16), t=st.floats(0.0, 2.0))
def test_heat_contracts_and_preserves_divfree(seed, t):
    g = make_grid(2, 16)
    f = portable_field(g, 3, seed)
    h = heat_semigroup(f, t)
    assert sup_norm(divergence(h)) <= 1e-12
    assert l2_inner(h, h) <= l2_inner(f, f) * (1 + 1e-14)


@given(seed=st.integers(0, 2**16))
def test_leray_idempotent_and_orthogonal_to_gradients(seed):
    g = make_grid(2, 16)
    rng = np.random.default_rng(seed)
    f = from_physical(g, rng.standard_normal((2,) + g.shape))
    phi = from_physical(g, rng.standard_normal(g.shape))
    p = leray_project(f)
    assert np.abs(leray_project(p).coeffs - p.coeffs).max() <= 1e-13
    assert abs(l2_inner(p, gradient(phi))) <= 1e-10 * math.sqrt(l2_inner(f, f) * l2_inner(gradient(phi), gradient(phi)))


@given(seed=st.integers(0, 2**16), alpha=st.floats(-3, 3))
def test_product_bilinear(seed, alpha):
    g = make_grid(2, 16)
    u, v = portable_field(g, 3, seed), portable_field(g, 2, seed + 1)
    lhs = tensor_product(u * alpha, v).coeffs
    assert np.abs(lhs - alpha * tensor_product(u, v).coeffs).max() <= 1e-12 * max(1, abs(alpha))
