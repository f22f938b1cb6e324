"""Built-in divergence-free initial data.

Every family returns a mean-zero, divergence-free, dealiased :class:`Field`.
``FAMILIES`` maps a name onto its constructor and a parameter schema so the
command line can list and instantiate them from JSON.
"""

import numpy as np

from .spectral import dealias, from_physical, leray_project

__all__ = [
    "FAMILIES",
    "taylor_green",
    "rotated_mode",
    "taylor_green_mixed",
    "random_band",
    "three_band",
    "instantiate",
]


def _finish(f):
    return leray_project(dealias(f))


def _check_in_band(grid, k):
    if any(abs(int(v)) > grid.kmax_dealias for v in k):
        raise ValueError(f"wave vector {tuple(k)} outside the dealiased band of {grid}")


def taylor_green(grid, amplitude=1.0):
    """``(sin x1 cos x2, -cos x1 sin x2)``; in 3D times ``cos x3`` with zero third component."""
    x = grid.x / grid.period
    if grid.dim == 2:
        u = np.stack([np.sin(x[0]) * np.cos(x[1]), -np.cos(x[0]) * np.sin(x[1])])
    else:
        c3 = np.cos(x[2])
        u = np.stack([
            np.sin(x[0]) * np.cos(x[1]) * c3,
            -np.cos(x[0]) * np.sin(x[1]) * c3,
            np.zeros_like(c3),
        ])
    return _finish(from_physical(grid, amplitude * u))


def _perp(k):
    k = np.asarray(k, dtype=float)
    if k.size == 2:
        e = np.array([-k[1], k[0]])
    else:
        axis = np.eye(3)[np.argmin(np.abs(k))]
        e = np.cross(k, axis)
    return e / np.linalg.norm(e)


def rotated_mode(grid, k=(1, 0), amplitude=1.0, phase=0.0):
    """Single plane wave ``amplitude * e_perp(k) * cos(k.x + phase)``."""
    k = tuple(int(v) for v in k)
    if len(k) != grid.dim or not any(k):
        raise ValueError(f"need a nonzero {grid.dim}-component wave vector, got {k}")
    _check_in_band(grid, k)
    x = grid.x / grid.period
    arg = sum(ki * xi for ki, xi in zip(k, x)) + phase
    e = _perp(k)
    u = amplitude * e[(slice(None),) + (None,) * grid.dim] * np.cos(arg)
    return _finish(from_physical(grid, u))


def taylor_green_mixed(grid, amplitude=1.0, beta=0.5, k2=None):
    """Taylor-Green plus a rotated mode on a second shell.

    Pure Taylor-Green is a steady Euler flow, so its self-interaction vanishes
    after projection; the extra shell makes the nonlinearity active.
    """
    if k2 is None:
        k2 = (1, 2) if grid.dim == 2 else (1, 2, 0)
    tg = taylor_green(grid, 1.0)
    extra = rotated_mode(grid, k2, beta)
    return (tg + extra) * amplitude


def random_band(grid, kmax=3, seed=0, amplitude=1.0):
    """Gaussian coefficients on ``0 < |n| <= kmax``, scaled to sup norm ``amplitude``."""
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    rng = np.random.default_rng(seed)
    band = (grid.kabs * grid.period <= kmax) & grid.dealias_mask
    phys = rng.standard_normal((grid.dim,) + grid.shape)
    f = from_physical(grid, phys)
    f = f.with_coeffs(f.coeffs * band)
    u = _finish(f)
    peak = np.sqrt(np.sum(u.physical() ** 2, axis=0)).max()
    if peak == 0:
        return u
    return u * (amplitude / peak)


def three_band(grid, low=0.01, mid=0.003, high=0.001, k_mid=None, k_high=None):
    """Low Taylor-Green plus a mid mode and a high spike, for splitting runs."""
    if k_mid is None:
        k_mid = (3, 2) if grid.dim == 2 else (3, 2, 0)
    if k_high is None:
        k_high = (8, 5) if grid.dim == 2 else (4, 3, 1)
    return taylor_green(grid, low) + rotated_mode(grid, k_mid, mid) + rotated_mode(grid, k_high, high)


FAMILIES = {
    "taylor_green": (taylor_green, {"amplitude": ("float", 1.0)}),
    "taylor_green_mixed": (
        taylor_green_mixed,
        {"amplitude": ("float", 1.0), "beta": ("float", 0.5), "k2": ("int list", None)},
    ),
    "rotated_mode": (
        rotated_mode,
        {"k": ("int list", [1, 0]), "amplitude": ("float", 1.0), "phase": ("float", 0.0)},
    ),
    "random_band": (
        random_band,
        {"kmax": ("int", 3), "seed": ("int", 0), "amplitude": ("float", 1.0)},
    ),
    "three_band": (
        three_band,
        {
            "low": ("float", 0.01),
            "mid": ("float", 0.003),
            "high": ("float", 0.001),
            "k_mid": ("int list", None),
            "k_high": ("int list", None),
        },
    ),
}


def instantiate(name, grid, **params):
    if name not in FAMILIES:
        raise KeyError(f"unknown family {name!r}; known: {sorted(FAMILIES)}")
    ctor, schema = FAMILIES[name]
    unknown = set(params) - set(schema)
    if unknown:
        raise TypeError(f"family {name!r} does not take {sorted(unknown)}")
    return ctor(grid, **params)
