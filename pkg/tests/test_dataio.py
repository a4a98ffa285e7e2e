import numpy as np
import pytest

from robustqoe.dataio import MAGIC, read_binary, read_csv, read_points, write_binary, write_csv


def test_csv_round_trip(tmp_path):
    data = np.random.default_rng(0).normal(size=(20, 3)) * 1e7
    path = tmp_path / "d.csv"
    write_csv(path, data, ["a", "b", "c"])
    names, back = read_csv(path)
    assert names == ["a", "b", "c"]
    assert np.array_equal(back, data)


def test_csv_errors_carry_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y\n1,2\n3,oops\n")
    with pytest.raises(ValueError, match=r"bad.csv:3"):
        read_csv(path)
    path.write_text("x,y\n1,2\n3\n")
    with pytest.raises(ValueError, match=r"bad.csv:3: expected 2 fields"):
        read_csv(path)
    path.write_text("x,y\n1,nan\n")
    with pytest.raises(ValueError, match="non-finite"):
        read_csv(path)
    with pytest.raises(ValueError, match="column names"):
        write_csv(tmp_path / "w.csv", np.zeros((2, 2)), ["only"])


def test_points_with_and_without_header(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("1,0\n-1,0\n0,1\n0,-1\n")
    assert read_points(path).shape == (4, 2)
    path.write_text("x,y\n1,0\n-1,0\n")
    assert np.array_equal(read_points(path), [[1, 0], [-1, 0]])
    path.write_text("x,y\n")
    with pytest.raises(ValueError):
        read_points(path)


def test_binary_round_trip_and_layout(tmp_path):
    data = np.arange(6.0).reshape(3, 2) - 2.5
    path = tmp_path / "d.bin"
    write_binary(path, data)
    raw = path.read_bytes()
    assert raw[:8] == MAGIC
    assert int.from_bytes(raw[8:16], "little") == 3 and int.from_bytes(raw[16:24], "little") == 2
    assert np.array_equal(np.frombuffer(raw[24:], "<f8"), data.ravel())
    assert np.array_equal(read_binary(path), data)


def test_binary_errors(tmp_path):
    path = tmp_path / "d.bin"
    write_binary(path, np.ones((4, 2)))
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(ValueError, match="expected"):
        read_binary(path)
    path.write_bytes(b"NOTMAGIC" + raw[8:])
    with pytest.raises(ValueError, match="magic"):
        read_binary(path)
    path.write_bytes(raw[:10])
    with pytest.raises(ValueError, match="truncated"):
        read_binary(path)
