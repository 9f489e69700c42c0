import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import array_shapes, arrays

from actiongroup.errors import DataError
from actiongroup.tensorio import MAGIC, read_matrix_csv, read_tensor, write_matrix_csv, write_tensor


@settings(max_examples=40, deadline=None)
@given(a=arrays(np.float64, array_shapes(min_dims=0, max_dims=4, min_side=0, max_side=5),
                elements=st.floats(allow_nan=False, width=64)))
def test_tensor_round_trip(tmp_path_factory, a):
    p = tmp_path_factory.mktemp("t") / "a.agt"
    write_tensor(p, a)
    b = read_tensor(p)
    assert b.shape == a.shape and np.array_equal(a, b)


def test_layout_is_little_endian_row_major(tmp_path):
    a = np.arange(6.0).reshape(2, 3)
    write_tensor(tmp_path / "a", a)
    raw = (tmp_path / "a").read_bytes()
    assert raw[:8] == MAGIC
    assert int.from_bytes(raw[8:12], "little") == 2
    assert int.from_bytes(raw[12:20], "little") == 2 and int.from_bytes(raw[20:28], "little") == 3
    assert np.array_equal(np.frombuffer(raw[28:], "<f8"), np.arange(6.0))


def test_corrupt_files(tmp_path):
    write_tensor(tmp_path / "a", np.ones((2, 2)))
    raw = (tmp_path / "a").read_bytes()
    (tmp_path / "bad").write_bytes(b"XXXXXXXX" + raw[8:])
    (tmp_path / "short").write_bytes(raw[:-3])
    for name in ("bad", "short"):
        with pytest.raises(DataError):
            read_tensor(tmp_path / name)
    with pytest.raises(DataError):
        read_tensor(tmp_path / "missing")


def test_matrix_csv(tmp_path):
    M = np.array([[1.0, 0.25], [0.25, 1.0]])
    write_matrix_csv(tmp_path / "m.csv", M, [3, 7], [3, 7])
    back, rows, cols = read_matrix_csv(tmp_path / "m.csv")
    assert np.array_equal(back, M) and rows == ["3", "7"] and cols == ["3", "7"]
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == ",3,7"
