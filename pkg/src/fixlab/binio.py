"""Little-endian binary containers and atomic file output.

All formats start with a 4-byte ASCII magic:

* ``GMAT`` u32 rows, u32 cols, rows*cols f32 (row-major)
* ``GDSC`` u32 d, then per image: u32 id_len, id bytes, u32 count,
  count * (f32 x, f32 y, d * f32)
* ``GDIC`` u32 l, u32 d, l*d f32
* ``GSVM`` u32 classes, u32 dim, classes*(dim+1) f32 (bias last)
"""
from __future__ import annotations

import io
import os
import struct
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .errors import FormatError

_F32 = np.dtype("<f4")


@contextmanager
def atomic_open(path, mode="w", **kwargs):
    """Write to a temp file beside ``path`` and rename it into place on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    os.close(fd)
    try:
        with open(tmp, mode, **kwargs) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_bytes_atomic(path, data: bytes):
    with atomic_open(path, "wb") as fh:
        fh.write(data)


def write_text_atomic(path, text: str):
    with atomic_open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


class _Reader:
    def __init__(self, data: bytes, name):
        self.buf = memoryview(data)
        self.pos = 0
        self.name = name

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise FormatError(
                f"{self.name}: truncated or inconsistent record at byte {self.pos} "
                f"(dimension mismatch?)"
            )
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def f32(self, count):
        return np.frombuffer(self.take(4 * count), dtype=_F32).astype(np.float64)

    def done(self):
        return self.pos == len(self.buf)


def _open_magic(path, magic):
    data = Path(path).read_bytes()
    if data[:4] != magic:
        raise FormatError(f"{path}: bad magic {data[:4]!r}, expected {magic!r}")
    r = _Reader(data, str(path))
    r.pos = 4
    return r


def encode_matrix(values) -> bytes:
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError("GMAT holds 2-D matrices only")
    rows, cols = values.shape
    return b"GMAT" + struct.pack("<II", rows, cols) + values.astype(_F32).tobytes()


def read_matrix(path) -> np.ndarray:
    r = _open_magic(path, b"GMAT")
    rows, cols = r.u32(), r.u32()
    out = r.f32(rows * cols).reshape(rows, cols)
    if not r.done():
        raise FormatError(f"{path}: trailing bytes")
    return out


def encode_pgm16(values) -> bytes:
    """16-bit binary PGM (P5, big-endian samples) of values in [0, 1]."""
    values = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    rows, cols = values.shape
    pixels = np.rint(values * 65535.0).astype(">u2")
    return f"P5\n{cols} {rows}\n65535\n".encode("ascii") + pixels.tobytes()


def encode_descriptors(records, d) -> bytes:
    """``records``: iterable of (image_id, centers (m,2), vectors (m,d))."""
    out = io.BytesIO()
    out.write(b"GDSC" + struct.pack("<I", d))
    for image_id, centers, vectors in records:
        centers = np.asarray(centers, dtype=float).reshape(-1, 2)
        vectors = np.asarray(vectors, dtype=float).reshape(-1, d)
        if len(centers) != len(vectors):
            raise ValueError(f"{image_id}: centers/vectors length mismatch")
        raw = image_id.encode("utf-8")
        out.write(struct.pack("<I", len(raw)) + raw + struct.pack("<I", len(vectors)))
        out.write(np.hstack([centers, vectors]).astype(_F32).tobytes())
    return out.getvalue()


def read_descriptors(path):
    """Return (d, [(image_id, centers, vectors), ...])."""
    r = _open_magic(path, b"GDSC")
    d = r.u32()
    records = []
    while not r.done():
        n_id = r.u32()
        try:
            image_id = bytes(r.take(n_id)).decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError(f"{path}: image id is not UTF-8") from None
        count = r.u32()
        block = r.f32(count * (d + 2)).reshape(count, d + 2)
        records.append((image_id, block[:, :2], block[:, 2:]))
    return d, records


def encode_dictionary(atoms) -> bytes:
    atoms = np.asarray(atoms, dtype=float)
    l, d = atoms.shape
    return b"GDIC" + struct.pack("<II", l, d) + atoms.astype(_F32).tobytes()


def read_dictionary_atoms(path) -> np.ndarray:
    r = _open_magic(path, b"GDIC")
    l, d = r.u32(), r.u32()
    atoms = r.f32(l * d).reshape(l, d)
    if not r.done():
        raise FormatError(f"{path}: trailing bytes")
    return atoms


def encode_svm(weights) -> bytes:
    weights = np.asarray(weights, dtype=float)
    k, dim1 = weights.shape
    return b"GSVM" + struct.pack("<II", k, dim1 - 1) + weights.astype(_F32).tobytes()


def read_svm_weights(path) -> np.ndarray:
    r = _open_magic(path, b"GSVM")
    k, dim = r.u32(), r.u32()
    weights = r.f32(k * (dim + 1)).reshape(k, dim + 1)
    if not r.done():
        raise FormatError(f"{path}: trailing bytes")
    return weights
