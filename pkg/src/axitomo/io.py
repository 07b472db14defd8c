"""Binary file formats and JSON sidecars.

System matrix (``.axsm``), all little-endian::

    b"AXSM" | u32 version | u64 n_rows | u64 n_cols | u64 nnz
    | u64[n_rows + 1] row offsets | u64[nnz] column indices | f64[nnz] values

Volumes and projections are flat little-endian f64 arrays.  Every file
``X`` has a JSON sidecar ``X.json`` carrying dimensions and provenance.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path
from typing import Iterable, Optional, Tuple, Union

import numpy as np

from .frame import FilterBank
from .projector import SystemMatrix

PathLike = Union[str, Path]

MAGIC = b"AXSM"
VERSION = 1
_HEADER = struct.Struct("<4sIQQQ")


class FormatError(ValueError):
    pass


def _prepare(path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def sidecar_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_sidecar(path: PathLike, meta: dict) -> None:
    text = json.dumps(meta, indent=2, sort_keys=True) + "\n"
    sidecar_path(path).write_text(text)


def read_sidecar(path: PathLike) -> dict:
    side = sidecar_path(path)
    if not side.exists():
        return {}
    return json.loads(side.read_text())


def write_matrix(path: PathLike, A: SystemMatrix, meta: Optional[dict] = None) -> None:
    path = _prepare(path)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, A.n_rows, A.n_cols, A.nnz))
        f.write(np.ascontiguousarray(A.indptr, dtype="<u8").tobytes())
        f.write(np.ascontiguousarray(A.indices, dtype="<u8").tobytes())
        f.write(np.ascontiguousarray(A.data, dtype="<f8").tobytes())
    if meta is not None:
        write_sidecar(path, dict(meta, kind="system_matrix", n_rows=A.n_rows, n_cols=A.n_cols, nnz=A.nnz))


def read_matrix(path: PathLike) -> Tuple[SystemMatrix, dict]:
    buf = Path(path).read_bytes()
    if len(buf) < _HEADER.size:
        raise FormatError(f"{path}: file too short for an AXSM header")
    magic, version, n_rows, n_cols, nnz = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 8 * (n_rows + 1) + 16 * nnz
    if len(buf) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(buf)}")
    off = _HEADER.size
    indptr = np.frombuffer(buf, dtype="<u8", count=n_rows + 1, offset=off).astype(np.int64)
    off += 8 * (n_rows + 1)
    indices = np.frombuffer(buf, dtype="<u8", count=nnz, offset=off).astype(np.int64)
    off += 8 * nnz
    data = np.frombuffer(buf, dtype="<f8", count=nnz, offset=off).astype(np.float64)
    if indptr[-1] != nnz:
        raise FormatError(f"{path}: row offsets do not end at nnz")
    return SystemMatrix(indptr, indices, data, int(n_cols)), read_sidecar(path)


def write_array(path: PathLike, arr: np.ndarray, meta: dict, order: str = "F") -> None:
    """Write ``arr`` flattened in ``order`` plus a sidecar recording its dims."""
    arr = np.asarray(arr, dtype=np.float64)
    _prepare(path).write_bytes(arr.ravel(order=order).astype("<f8").tobytes())
    write_sidecar(path, dict(meta, dims=list(arr.shape), order=order, dtype="<f8"))


def read_array(path: PathLike) -> Tuple[np.ndarray, dict]:
    meta = read_sidecar(path)
    flat = np.frombuffer(Path(path).read_bytes(), dtype="<f8").astype(np.float64)
    if "dims" not in meta:
        return flat, meta
    dims = tuple(int(d) for d in meta["dims"])
    if int(np.prod(dims)) != flat.size:
        raise FormatError(f"{path}: sidecar dims {dims} do not match {flat.size} values")
    return flat.reshape(dims, order=meta.get("order", "F")), meta


def write_pgm16(path: PathLike, img: np.ndarray) -> None:
    """Binary 16-bit PGM (big-endian samples, maxval 65535)."""
    img = np.asarray(img)
    if img.dtype != np.uint16:
        raise TypeError("PGM writer expects a uint16 image")
    h, w = img.shape
    with open(_prepare(path), "wb") as f:
        f.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        f.write(img.astype(">u2").tobytes())


def read_pgm16(path: PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM")
    w, h, maxval = (int(t) for t in tokens[1:])
    dtype = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(data, dtype=dtype, count=w * h, offset=pos).reshape(h, w).astype(np.uint16)


def write_bank(path: PathLike, bank: FilterBank) -> None:
    _prepare(path).write_text(bank.to_json() + "\n")


def read_bank(path: PathLike) -> FilterBank:
    return FilterBank.from_json(Path(path).read_text())


def write_csv(path: PathLike, header: Iterable[str], rows: Iterable[Iterable]) -> None:
    with open(_prepare(path), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(list(header))
        for row in rows:
            w.writerow(list(row))
