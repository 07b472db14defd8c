import json

import numpy as np
import pytest

from axitomo import io
from axitomo.frame import spectral_initial_bank
from axitomo.projector import SystemMatrix, build_system_matrix


def test_matrix_round_trip(tmp_path, small_grid, small_geom):
    A = build_system_matrix(small_geom, small_grid)
    path = tmp_path / "sub" / "a.axsm"
    io.write_matrix(path, A, meta={"grid": small_grid.to_dict()})
    B, meta = io.read_matrix(path)
    assert np.array_equal(A.indptr, B.indptr) and np.array_equal(A.indices, B.indices)
    assert np.array_equal(A.data, B.data) and A.n_cols == B.n_cols
    assert meta["kind"] == "system_matrix" and meta["nnz"] == A.nnz
    assert meta["grid"] == small_grid.to_dict()


def test_matrix_layout(tmp_path):
    A = SystemMatrix.from_dense(np.array([[0.0, 1.5], [2.0, 0.0], [0.0, 0.0]]))
    path = tmp_path / "m.axsm"
    io.write_matrix(path, A)
    raw = path.read_bytes()
    assert raw[:4] == b"AXSM"
    assert np.frombuffer(raw, "<u4", 1, 4)[0] == 1
    assert list(np.frombuffer(raw, "<u8", 3, 8)) == [3, 2, 2]
    assert list(np.frombuffer(raw, "<u8", 4, 32)) == [0, 1, 2, 2]
    assert list(np.frombuffer(raw, "<u8", 2, 64)) == [1, 0]
    assert list(np.frombuffer(raw, "<f8", 2, 80)) == [1.5, 2.0]
    assert len(raw) == 96
    assert not io.sidecar_path(path).exists()


@pytest.mark.parametrize("mutate", [
    lambda b: b"XXXX" + b[4:],
    lambda b: b[:4] + (2).to_bytes(4, "little") + b[8:],
    lambda b: b[:-1],
    lambda b: b[:10],
])
def test_matrix_format_errors(tmp_path, mutate):
    A = SystemMatrix.from_dense(np.eye(3))
    path = tmp_path / "m.axsm"
    io.write_matrix(path, A)
    path.write_bytes(mutate(path.read_bytes()))
    with pytest.raises(io.FormatError):
        io.read_matrix(path)


def test_array_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    arr = rng.standard_normal((5, 8))
    arr[0, 0] = np.nextafter(0.0, 1.0)
    path = tmp_path / "v.f64"
    io.write_array(path, arr, {"kind": "volume"})
    back, meta = io.read_array(path)
    assert np.array_equal(arr, back)
    assert meta["dims"] == [5, 8] and meta["order"] == "F" and meta["kind"] == "volume"
    # first 8 bytes are arr[0, 0], next arr[1, 0]: column-major payload
    assert np.frombuffer(path.read_bytes(), "<f8", 2)[1] == arr[1, 0]
    meta["dims"] = [4, 8]
    io.sidecar_path(path).write_text(json.dumps(meta))
    with pytest.raises(io.FormatError):
        io.read_array(path)


def test_pgm_round_trip(tmp_path):
    img = np.array([[0, 1, 65535], [256, 4096, 12]], dtype=np.uint16)
    path = tmp_path / "x.pgm"
    io.write_pgm16(path, img)
    assert path.read_bytes().startswith(b"P5\n3 2\n65535\n")
    assert np.array_equal(io.read_pgm16(path), img)
    with pytest.raises(TypeError):
        io.write_pgm16(path, img.astype(float))


def test_bank_and_csv(tmp_path):
    bank = spectral_initial_bank(3)
    io.write_bank(tmp_path / "b.json", bank)
    assert np.array_equal(io.read_bank(tmp_path / "b.json").B, bank.B)
    io.write_csv(tmp_path / "d.csv", ["a", "b"], [[1, 2.5], [3, 4]])
    assert (tmp_path / "d.csv").read_text().splitlines() == ["a,b", "1,2.5", "3,4"]
