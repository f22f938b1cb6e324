"""Spectral discretization of the periodic torus ``[0, 2*pi*L)^N``.

Fields are stored as Fourier-series coefficients on the full (complex) FFT
lattice, normalized so that ``u(x) = sum_k u_hat(k) exp(i k.x)``.  All
diagonal operators (heat flow, Leray projection, derivatives) act through
their exact per-mode symbols.  Quadratic products are formed on the physical
grid and truncated with the 2/3 rule, which keeps products of in-band fields
alias free and makes discrete integrals of cubic expressions exact.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import GridMismatchError

__all__ = [
    "Grid",
    "Field",
    "TensorField",
    "make_grid",
    "from_physical",
    "to_physical",
    "heat_semigroup",
    "heat_symbol",
    "leray_project",
    "divergence",
    "gradient",
    "laplacian",
    "tensor_product",
    "tensor_divergence",
    "pdiv_semigroup",
    "dealias",
    "l2_inner",
    "l2_norm",
    "lp_norm",
    "sup_norm",
    "tensor_sup_norm",
]


@dataclass(frozen=True)
class Grid:
    """Periodic grid with ``modes`` points per axis and period ``2*pi*period``."""

    dim: int
    modes: int
    period: float = 1.0

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.modes % 2 or self.modes < 8:
            raise ValueError(f"modes_per_axis must be even and >= 8, got {self.modes}")
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")

    @property
    def shape(self):
        return (self.modes,) * self.dim

    @property
    def npoints(self):
        return self.modes**self.dim

    @cached_property
    def index(self):
        """Integer lattice indices, shape ``(dim, *shape)``."""
        n = np.fft.fftfreq(self.modes, 1.0 / self.modes).astype(np.int64)
        return np.stack(np.meshgrid(*([n] * self.dim), indexing="ij"))

    @cached_property
    def k(self):
        return self.index / self.period

    @cached_property
    def ksq(self):
        return np.sum(self.k**2, axis=0)

    @cached_property
    def kabs(self):
        return np.sqrt(self.ksq)

    @cached_property
    def inv_ksq(self):
        out = np.zeros(self.shape)
        nz = self.ksq > 0
        out[nz] = 1.0 / self.ksq[nz]
        return out

    @property
    def kmax_dealias(self):
        """Largest retained integer index per axis under the 2/3 rule."""
        return (self.modes - 1) // 3

    @cached_property
    def dealias_mask(self):
        return np.all(np.abs(self.index) <= self.kmax_dealias, axis=0)

    @cached_property
    def kmax_resolved(self):
        """Largest |k| carried by the dealiased band."""
        return float(self.kabs[self.dealias_mask].max())

    @property
    def volume(self):
        return (2.0 * np.pi * self.period) ** self.dim

    @property
    def cell_volume(self):
        return self.volume / self.npoints

    @cached_property
    def x(self):
        """Physical node coordinates, shape ``(dim, *shape)``."""
        x1 = 2.0 * np.pi * self.period * np.arange(self.modes) / self.modes
        return np.stack(np.meshgrid(*([x1] * self.dim), indexing="ij"))

    def zero_index(self):
        return (0,) * self.dim

    def mode_position(self, n):
        """Array position of the integer wave vector ``n``."""
        n = tuple(int(v) for v in n)
        if len(n) != self.dim:
            raise ValueError("wave vector has wrong dimension")
        if any(abs(v) >= self.modes // 2 for v in n):
            raise ValueError(f"wave vector {n} not representable on this grid")
        return tuple(v % self.modes for v in n)


def make_grid(dim, modes_per_axis, period=1.0):
    return Grid(int(dim), int(modes_per_axis), float(period))


def _readonly(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Field:
    """Scalar (one component) or vector (``dim`` components) spectral field."""

    grid: Grid
    coeffs: np.ndarray
    divergence_free: bool = False
    mean_zero: bool = False

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128, copy=True)
        if c.shape == self.grid.shape:
            c = c[None]
        if c.shape[1:] != self.grid.shape or c.shape[0] not in (1, self.grid.dim):
            raise ValueError(f"coefficient shape {c.shape} does not fit grid {self.grid}")
        object.__setattr__(self, "coeffs", _readonly(c))

    @property
    def ncomp(self):
        return self.coeffs.shape[0]

    @property
    def is_scalar(self):
        return self.ncomp == 1

    def physical(self):
        return to_physical(self)

    def with_coeffs(self, coeffs, divergence_free=None, mean_zero=None):
        return Field(
            self.grid,
            coeffs,
            self.divergence_free if divergence_free is None else divergence_free,
            self.mean_zero if mean_zero is None else mean_zero,
        )

    def _combine(self, other, op):
        if not isinstance(other, Field):
            return NotImplemented
        _check_grid(self.grid, other.grid)
        return Field(
            self.grid,
            op(self.coeffs, other.coeffs),
            self.divergence_free and other.divergence_free,
            self.mean_zero and other.mean_zero,
        )

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_coeffs(-self.coeffs)

    def check_invariants(self, tol=1e-12):
        """Verify the flags the field claims; returns a list of violations."""
        problems = []
        g = self.grid
        c = self.coeffs
        flipped = c[(slice(None),) + tuple(np.s_[::-1] for _ in range(g.dim))]
        flipped = np.roll(flipped, 1, axis=tuple(range(1, g.dim + 1)))
        asym = np.abs(flipped - np.conj(c)).max()
        scale = max(np.abs(c).max(), 1e-300)
        if asym > tol * scale:
            problems.append(f"conjugate symmetry violated by {asym:.3e}")
        if self.divergence_free and self.ncomp == g.dim:
            div = np.abs(np.einsum("i...,i...->...", g.k, c)).max()
            norm = np.sqrt(np.sum(np.abs(c) ** 2))
            if div > tol * max(norm, 1e-300):
                problems.append(f"divergence {div:.3e} exceeds tolerance")
        if self.mean_zero and np.any(c[(slice(None),) + g.zero_index()] != 0):
            problems.append("mean mode is not exactly zero")
        return problems


@dataclass(frozen=True, eq=False)
class TensorField:
    """``dim x dim`` tensor field in spectral form."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.complex128, copy=True)
        d = self.grid.dim
        if c.shape != (d, d) + self.grid.shape:
            raise ValueError(f"tensor coefficient shape {c.shape} does not fit grid")
        object.__setattr__(self, "coeffs", _readonly(c))

    def physical(self):
        axes = tuple(range(-self.grid.dim, 0))
        return np.fft.ifftn(self.coeffs, axes=axes, norm="forward").real


def _check_grid(a, b):
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


def _axes(grid):
    return tuple(range(-grid.dim, 0))


def fft(grid, values):
    return np.fft.fftn(values, axes=_axes(grid), norm="forward")


def ifft(grid, coeffs):
    return np.fft.ifftn(coeffs, axes=_axes(grid), norm="forward").real


def from_physical(grid, values, divergence_free=False, mean_zero=False):
    """Spectral field from node values (shape ``(c, *shape)`` or ``shape``)."""
    values = np.asarray(values, dtype=float)
    return Field(grid, fft(grid, values), divergence_free, mean_zero)


def to_physical(f):
    return ifft(f.grid, f.coeffs)


def heat_symbol(grid, t):
    return np.exp(-grid.ksq * t)


def heat_semigroup(f, t):
    """Apply ``exp(t*Laplacian)``; flags are preserved."""
    if t < 0:
        raise ValueError(f"heat semigroup needs t >= 0, got {t}")
    if t == 0:
        return f.with_coeffs(f.coeffs)
    return f.with_coeffs(f.coeffs * heat_symbol(f.grid, t))


def leray_coeffs(grid, c):
    """Leray projection of coefficient arrays with layout ``(..., dim, *shape)``."""
    d = grid.dim
    k = grid.k
    kdotc = np.sum(k * c, axis=-d - 1, keepdims=True)
    out = c - k * (kdotc * grid.inv_ksq)
    out[(Ellipsis,) + grid.zero_index()] = 0.0
    return out


def leray_project(f):
    """Orthogonal projection onto mean-zero divergence-free fields."""
    if f.ncomp != f.grid.dim:
        raise ValueError("Leray projection needs a vector field")
    return Field(f.grid, leray_coeffs(f.grid, np.array(f.coeffs)), True, True)


def divergence(f):
    if f.ncomp != f.grid.dim:
        raise ValueError("divergence needs a vector field")
    return Field(f.grid, np.sum(1j * f.grid.k * f.coeffs, axis=0)[None], mean_zero=True)


def gradient(f):
    if not f.is_scalar:
        raise ValueError("gradient needs a scalar field")
    return Field(f.grid, 1j * f.grid.k * f.coeffs[0], mean_zero=True)


def laplacian(f):
    return f.with_coeffs(-f.grid.ksq * f.coeffs)


def dealias(f):
    return f.with_coeffs(f.coeffs * f.grid.dealias_mask)


def product_coeffs(grid, uphys, vphys, symmetrize=False):
    """Dealiased spectral coefficients of ``u_i v_j`` from node values.

    ``uphys`` and ``vphys`` have layout ``(..., dim, *shape)``; the result has
    layout ``(..., dim, dim, *shape)``.
    """
    d = grid.dim
    ui = np.expand_dims(uphys, axis=-d - 1)
    vj = np.expand_dims(vphys, axis=-d - 2)
    prod = ui * vj
    if symmetrize:
        prod = 0.5 * (prod + np.swapaxes(prod, -d - 2, -d - 1))
    return fft(grid, prod) * grid.dealias_mask


def tensor_product(u, v, symmetrize=False):
    """Pointwise ``u_i v_j`` (or its symmetric part), 2/3-rule dealiased."""
    _check_grid(u.grid, v.grid)
    if u.ncomp != u.grid.dim or v.ncomp != v.grid.dim:
        raise ValueError("tensor product needs vector fields")
    return TensorField(u.grid, product_coeffs(u.grid, to_physical(u), to_physical(v), symmetrize))


def tensor_divergence_coeffs(grid, s):
    """``(div S)_i = sum_j d_j S_ji`` for layout ``(..., dim, dim, *shape)``."""
    d = grid.dim
    k = grid.k[:, None]  # (dim_j, 1, *shape) broadcasts against S_ji
    return np.sum(1j * k * s, axis=-d - 2)


def tensor_divergence(S):
    return Field(S.grid, tensor_divergence_coeffs(S.grid, S.coeffs), mean_zero=True)


def pdiv_semigroup(S, t):
    """``exp(t*Laplacian) P div S`` through its exact per-mode symbol."""
    if not t > 0:
        raise ValueError(f"pdiv_semigroup needs t > 0, got {t}")
    g = S.grid
    c = leray_coeffs(g, tensor_divergence_coeffs(g, S.coeffs)) * heat_symbol(g, t)
    return Field(g, c, True, True)


def l2_inner(f, g):
    """``integral f . g dx`` over the torus (real fields)."""
    _check_grid(f.grid, g.grid)
    return float(f.grid.volume * np.sum((np.conj(f.coeffs) * g.coeffs).real))


def l2_norm(f):
    return float(np.sqrt(f.grid.volume * np.sum(np.abs(f.coeffs) ** 2)))


def magnitude(values, grid):
    """Pointwise Euclidean magnitude over the component axis."""
    d = grid.dim
    comp = tuple(range(values.ndim - d - 1, values.ndim - d))
    return np.sqrt(np.sum(values**2, axis=comp))


def sup_norm(f):
    """Max over nodes of the pointwise Euclidean magnitude."""
    return float(magnitude(to_physical(f), f.grid).max())


def lp_norm(f, p):
    if p == np.inf:
        return sup_norm(f)
    if p < 1:
        raise ValueError("p must be >= 1")
    m = magnitude(to_physical(f), f.grid)
    return float((np.sum(m**p) * f.grid.cell_volume) ** (1.0 / p))


def tensor_sup_norm(S):
    """Max over nodes of the pointwise Frobenius norm."""
    phys = S.physical()
    return float(np.sqrt(np.sum(phys**2, axis=(0, 1))).max())
