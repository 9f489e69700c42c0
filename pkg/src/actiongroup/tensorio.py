"""Binary tensor container and CSV helpers.

Container layout (all little-endian)::

    8 bytes   magic  b"AGTENSR\\x01"
    uint32    ndim
    uint64    dims[ndim]
    float64   payload, row-major
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataError, FrameReadError

__all__ = ["MAGIC", "write_tensor", "read_tensor", "write_matrix_csv", "read_matrix_csv"]

MAGIC = b"AGTENSR\x01"


def write_tensor(path, array) -> None:
    arr = np.asarray(array, dtype="<f8", order="C")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        fh.write(arr.tobytes(order="C"))


def read_tensor(path) -> np.ndarray:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise FrameReadError(f"cannot read tensor file {path}: {exc}") from exc
    if raw[: len(MAGIC)] != MAGIC:
        raise DataError(f"{path}: not a tensor container (bad magic)")
    pos = len(MAGIC)
    if len(raw) < pos + 4:
        raise DataError(f"{path}: truncated header")
    (ndim,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    if len(raw) < pos + 8 * ndim:
        raise DataError(f"{path}: truncated header")
    dims = struct.unpack_from(f"<{ndim}Q", raw, pos)
    pos += 8 * ndim
    count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
    if len(raw) - pos != 8 * count:
        raise DataError(f"{path}: payload has {len(raw) - pos} bytes, expected {8 * count}")
    flat = np.frombuffer(raw, dtype="<f8", count=count, offset=pos)
    return np.reshape(flat, dims).astype(np.float64)


def write_matrix_csv(path, M, row_labels: Optional[Sequence] = None,
                     col_labels: Optional[Sequence] = None) -> None:
    """Matrix as CSV; the first row and column hold the labels."""
    M = np.asarray(M)
    rows = list(row_labels) if row_labels is not None else list(range(1, M.shape[0] + 1))
    cols = list(col_labels) if col_labels is not None else list(range(1, M.shape[1] + 1))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([""] + cols)
        for lab, row in zip(rows, M):
            w.writerow([lab] + [repr(float(v)) if M.dtype.kind == "f" else int(v) for v in row])


def read_matrix_csv(path):
    """Inverse of :func:`write_matrix_csv`; returns ``(M, row_labels, col_labels)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    cols = rows[0][1:]
    labels = [r[0] for r in rows[1:]]
    M = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return M, labels, cols
