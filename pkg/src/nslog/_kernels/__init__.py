"""Hot kernels: compiled core when built, numpy fallback otherwise.

Set ``NSLOG_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"

if os.environ.get("NSLOG_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core
    except ImportError:
        _core = None
    else:
        BACKEND = "compiled"
else:
    _core = None

_impl = _core if _core is not None else _fallback


def duhamel_scan(src, ksq, t_nodes, tau, weights, carry, t_prev):
    return _impl.duhamel_scan(src, ksq, t_nodes, tau, weights, carry, float(t_prev))


def cubic_form(coef, g):
    # BLAS-backed einsum beats the compiled loop at every n benchmarked
    return _fallback.cubic_form(coef, g)


def implementations():
    """Available backends by name, for benchmarks and equivalence tests."""
    out = {"python": _fallback}
    if _core is not None:
        out["compiled"] = _core
    return out
