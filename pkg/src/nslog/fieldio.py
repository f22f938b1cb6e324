"""Binary and text containers for spectral fields.

Binary layout (little endian): ``b"NSLG"``, version u32, dim u32, M u32,
L f64, then the component coefficient arrays as row-major complex128
(interleaved re/im).  The component count follows from the payload size.
"""

import struct
from pathlib import Path

import numpy as np

from .spectral import Field, make_grid

MAGIC = b"NSLG"
VERSION = 1
_HEADER = struct.Struct("<4sIIId")

__all__ = ["write_field", "read_field", "field_bytes", "field_from_bytes", "dump_text"]


def field_bytes(f):
    g = f.grid
    head = _HEADER.pack(MAGIC, VERSION, g.dim, g.modes, g.period)
    return head + np.ascontiguousarray(f.coeffs, dtype="<c16").tobytes()


def field_from_bytes(buf):
    if len(buf) < _HEADER.size:
        raise ValueError("truncated field container")
    magic, version, dim, modes, period = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"unsupported container version {version}")
    grid = make_grid(dim, modes, period)
    data = np.frombuffer(buf, dtype="<c16", offset=_HEADER.size)
    ncomp, rem = divmod(data.size, grid.npoints)
    if rem or ncomp not in (1, dim):
        raise ValueError("payload size does not match header")
    coeffs = data.reshape((ncomp,) + grid.shape)
    mean_zero = bool(np.all(coeffs[(slice(None),) + grid.zero_index()] == 0))
    f = Field(grid, coeffs, mean_zero=mean_zero)
    if ncomp == dim:
        probe = Field(grid, coeffs, divergence_free=True)
        if not probe.check_invariants():
            f = Field(grid, coeffs, divergence_free=True, mean_zero=mean_zero)
    return f


def write_field(path, f):
    Path(path).write_bytes(field_bytes(f))


def read_field(path):
    return field_from_bytes(Path(path).read_bytes())


def dump_text(f, path=None, atol=0.0):
    """One ``k_1 ... k_N re im`` line per mode and component; returns the text."""
    g = f.grid
    idx = g.index.reshape(g.dim, -1).T
    lines = []
    for c in range(f.ncomp):
        if f.ncomp > 1:
            lines.append(f"# component {c}")
        vals = f.coeffs[c].ravel()
        for n, v in zip(idx, vals):
            if abs(v) <= atol and atol > 0:
                continue
            ks = " ".join(str(int(x)) for x in n)
            lines.append(f"{ks} {v.real:.17g} {v.imag:.17g}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
