import math
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from besovkit.bsgf import MAGIC, read_grid_function, read_matrix, write_grid_function, write_matrix
from besovkit.errors import BadMagicError, FormatError, TruncatedPayloadError, VersionMismatchError
from besovkit.grid import Grid, GridFunction


def _sample(p=2.0):
    rng = np.random.default_rng(1)
    g = Grid((16, 8), (1.5, 3.0))
    return GridFunction(g, rng.standard_normal((16, 8, 3)) + 1j * rng.standard_normal((16, 8, 3)), p)


@pytest.mark.parametrize("p", [1.0, 2.0, 2.5, 3.0, math.inf])
def test_round_trip_bit_exact(tmp_path, p):
    f = _sample(p)
    path = tmp_path / "f.bsgf"
    write_grid_function(f, path)
    first = path.read_bytes()
    h = read_grid_function(path)
    assert h.grid == f.grid and h.fiber_norm_p == f.fiber_norm_p
    assert np.array_equal(h.values, f.values)
    write_grid_function(h, path)
    assert path.read_bytes() == first


def test_header_layout(tmp_path):
    path = tmp_path / "f.bsgf"
    write_grid_function(_sample(3.0), path)
    buf = path.read_bytes()
    assert buf[:4] == MAGIC
    version, n = struct.unpack_from("<II", buf, 4)
    assert (version, n) == (1, 2)
    assert struct.unpack_from("<2I", buf, 12) == (16, 8)
    assert struct.unpack_from("<2d", buf, 20) == (1.5, 3.0)
    assert struct.unpack_from("<3I", buf, 36) == (3, 3, 1)
    assert len(buf) == 48 + 16 * 8 * 3 * 16


def test_matrix_payload(tmp_path):
    M = np.arange(9).reshape(3, 3) + 1j
    path = tmp_path / "m.bsgf"
    write_matrix(M, path)
    assert np.array_equal(read_matrix(path), M)
    with pytest.raises(FormatError):
        read_grid_function(path)


def test_grid_file_is_not_a_matrix(tmp_path):
    path = tmp_path / "f.bsgf"
    write_grid_function(_sample(), path)
    with pytest.raises(FormatError):
        read_matrix(path)


def test_bad_magic(tmp_path):
    path = tmp_path / "x.bsgf"
    path.write_bytes(b"NOPE" + bytes(64))
    with pytest.raises(BadMagicError):
        read_grid_function(path)


def test_version_mismatch(tmp_path):
    path = tmp_path / "f.bsgf"
    write_grid_function(_sample(), path)
    buf = bytearray(path.read_bytes())
    buf[4:8] = struct.pack("<I", 7)
    path.write_bytes(bytes(buf))
    with pytest.raises(VersionMismatchError):
        read_grid_function(path)


@pytest.mark.parametrize("cut", [3, 10, 30, 100])
def test_truncated(tmp_path, cut):
    path = tmp_path / "f.bsgf"
    write_grid_function(_sample(), path)
    path.write_bytes(path.read_bytes()[:-cut] if cut > 40 else path.read_bytes()[:cut + 8])
    with pytest.raises(FormatError):
        read_grid_function(path)


def test_truncated_payload_error_type(tmp_path):
    path = tmp_path / "f.bsgf"
    write_grid_function(_sample(), path)
    path.write_bytes(path.read_bytes()[:-1])
    with pytest.raises(TruncatedPayloadError):
        read_grid_function(path)


def test_trailing_bytes(tmp_path):
    path = tmp_path / "f.bsgf"
    write_grid_function(_sample(), path)
    path.write_bytes(path.read_bytes() + b"\0")
    with pytest.raises(FormatError):
        read_grid_function(path)


@given(arrays(np.float64, (8, 2), elements=st.floats(allow_nan=False, allow_infinity=False, width=64)),
       st.sampled_from([1.0, 1.5, 2.0, 4.0, math.inf]))
def test_round_trip_property(tmp_path_factory, vals, p):
    path = tmp_path_factory.mktemp("rt") / "f.bsgf"
    f = GridFunction(Grid((8,), (0.7,)), vals[:, :1] + 1j * vals[:, 1:], p)
    write_grid_function(f, path)
    h = read_grid_function(path)
    assert np.array_equal(h.values, f.values) and h.fiber_norm_p == p
