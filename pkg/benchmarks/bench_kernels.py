"""Compare the compiled kernels with the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py``.  Each kernel is timed on
inputs shaped like a real solve; the two backends must agree before timing.
"""

import argparse
import timeit

import numpy as np

from nslog._kernels import implementations
from nslog.duhamel import TimeGrid
from nslog.spectral import make_grid


def scan_inputs(M, J, seed=0):
    g = make_grid(2, M)
    tg = TimeGrid(1.0, J)
    tau, wt = tg.quadrature()
    sel = np.flatnonzero(g.dealias_mask.ravel())
    rng = np.random.default_rng(seed)
    shape = (J, tg.quad_order, 2, sel.size)
    src = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    ksq = np.ascontiguousarray(g.ksq.ravel()[sel])
    return src, ksq, tg.nodes, tau, wt


def cubic_inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, n, n)), rng.standard_normal(n)


def bench(repeat=5):
    impls = implementations()
    rows = []
    for M, J in ((16, 128), (32, 128)):
        args = scan_inputs(M, J)

        def call(mod, args=args):
            src, ksq, t, tau, wt = args
            carry = np.zeros(src.shape[2:], dtype=np.complex128)
            return mod.duhamel_scan(src, ksq, t, tau, wt, carry, 0.0)

        ref = call(impls["python"])
        for name, mod in impls.items():
            err = float(np.abs(call(mod) - ref).max() / np.abs(ref).max())
            best = min(timeit.repeat(lambda mod=mod: call(mod), number=1, repeat=repeat))
            rows.append((f"duhamel_scan M={M} J={J}", name, best, err))
    for n in (60, 120, 240):
        coef, g = cubic_inputs(n)
        ref = impls["python"].cubic_form(coef, g)
        for name, mod in impls.items():
            err = float(np.abs(mod.cubic_form(coef, g) - ref).max() / np.abs(ref).max())
            best = min(timeit.repeat(lambda mod=mod: mod.cubic_form(coef, g), number=20, repeat=repeat)) / 20
            rows.append((f"cubic_form n={n}", name, best, err))
    return rows


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    rows = bench(args.repeat)
    print(f"{'kernel':28s} {'backend':9s} {'seconds':>12s} {'rel diff':>10s}")
    for kernel, name, t, err in rows:
        print(f"{kernel:28s} {name:9s} {t:12.6f} {err:10.2e}")
    if "compiled" not in implementations():
        print("compiled kernels not built; only the fallback was timed")


if __name__ == "__main__":
    main()
