"""Reader and writer for the BSGF binary grid-function format.

Layout, all little-endian::

    b"BSGF"            magic
    u32                format version
    u32                n (number of axes; 0 for a bare matrix payload)
    u32 * n            points per axis
    f64 * n            period per axis
    u32                fiber dimension d
    u32, u32           fiber exponent p as numerator / denominator
                       (p = infinity is stored as 0 / 1)
    f64 * 2 * M * d    interleaved (re, im); fiber-major within a point,
                       row-major over points

A matrix payload (``n = 0``) stores one point whose fiber holds the
row-major entries of a square matrix.
"""

from __future__ import annotations

import math
import struct
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    FormatError,
    TruncatedPayloadError,
    ValidationError,
    VersionMismatchError,
)
from .grid import Grid, GridFunction

__all__ = ["MAGIC", "VERSION", "write_grid_function", "read_grid_function", "write_matrix", "read_matrix"]

MAGIC = b"BSGF"
VERSION = 1


def _encode_p(p: float) -> tuple:
    if math.isinf(p):
        return 0, 1
    fr = Fraction(p).limit_denominator(1_000_000)
    return fr.numerator, fr.denominator


def _decode_p(num: int, den: int) -> float:
    if num == 0:
        if den != 1:
            raise FormatError(f"invalid fiber exponent encoding {num}/{den}")
        return math.inf
    if den == 0:
        raise FormatError("fiber exponent has zero denominator")
    return num / den


def _pack(sizes, periods, d, p, values) -> bytes:
    num, den = _encode_p(p)
    head = MAGIC + struct.pack("<II", VERSION, len(sizes))
    head += struct.pack(f"<{len(sizes)}I", *sizes)
    head += struct.pack(f"<{len(periods)}d", *periods)
    head += struct.pack("<III", d, num, den)
    flat = np.ascontiguousarray(values, dtype=np.complex128).reshape(-1)
    payload = flat.view(np.float64).astype("<f8").tobytes()
    return head + payload


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, fmt: str, what: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.buf):
            raise TruncatedPayloadError(f"file ends inside {what}")
        out = struct.unpack_from(fmt, self.buf, self.pos)
        self.pos += size
        return out


def _unpack(buf: bytes):
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise BadMagicError(f"bad magic {buf[:4]!r}, expected {MAGIC!r}")
    r = _Reader(buf)
    r.pos = 4
    (version,) = r.take("<I", "version")
    if version != VERSION:
        raise VersionMismatchError(f"file version {version}, reader supports {VERSION}")
    (n,) = r.take("<I", "header")
    if n > 3:
        raise FormatError(f"unsupported number of axes {n}")
    sizes = r.take(f"<{n}I", "axis sizes")
    periods = r.take(f"<{n}d", "axis periods")
    d, num, den = r.take("<III", "fiber header")
    p = _decode_p(num, den)
    count = math.prod(sizes) * d * 2
    nbytes = 8 * count
    if r.pos + nbytes > len(buf):
        raise TruncatedPayloadError(
            f"payload holds {len(buf) - r.pos} bytes, header requires {nbytes}"
        )
    if r.pos + nbytes != len(buf):
        raise FormatError(f"{len(buf) - r.pos - nbytes} trailing bytes after payload")
    re_im = np.frombuffer(buf, dtype="<f8", count=count, offset=r.pos).astype(np.float64)
    values = re_im.view(np.complex128).reshape(tuple(sizes) + (d,))
    return tuple(sizes), tuple(periods), d, p, values


def write_grid_function(f: GridFunction, path) -> None:
    """Write ``f`` to ``path`` in BSGF format."""
    if f.spectral:
        raise ValidationError("only physical-space grid functions are written")
    data = _pack(f.grid.sizes, f.grid.periods, f.fiber_dim, f.fiber_norm_p, f.values)
    Path(path).write_bytes(data)


def read_grid_function(path) -> GridFunction:
    """Read a BSGF file written by :func:`write_grid_function`."""
    buf = Path(path).read_bytes()
    sizes, periods, d, p, values = _unpack(buf)
    if not sizes:
        raise FormatError("file holds a matrix payload, not a grid function")
    return GridFunction(Grid(sizes, periods), values, p)


def write_matrix(matrix, path) -> None:
    m = np.asarray(matrix, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError("matrix payload must be square")
    Path(path).write_bytes(_pack((), (), m.size, 2.0, m.reshape(1, -1)))


def read_matrix(path) -> np.ndarray:
    sizes, _, d, _, values = _unpack(Path(path).read_bytes())
    if sizes:
        raise FormatError("file holds a grid function, not a matrix payload")
    k = math.isqrt(d)
    if k * k != d:
        raise FormatError(f"matrix payload length {d} is not a perfect square")
    return values.reshape(k, k)
