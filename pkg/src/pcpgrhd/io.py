"""Snapshot and diagnostics output.

Binary snapshot layout (little endian)::

    magic    8 bytes   b"PCPGRHD1"
    dims     3 x int64
    spacing  3 x float64
    time     float64
    payload  5 * n1 * n2 * n3 float64, component-major then C order

Unstructured fields are stored with ``dims = (N, 1, 1)`` and zero spacing.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .states import conserved_to_primitives, q_star, w_to_u

MAGIC = b"PCPGRHD1"
_HEADER = struct.Struct("<8s3q3dd")

SNAPSHOT_COLUMNS = ["index", "W0", "W1", "W2", "W3", "W4", "rho", "v1", "v2", "v3", "p", "q"]
DIAGNOSTIC_COLUMNS = [
    "step", "t", "dt", "min_W0", "min_q", "min_rho", "min_p", "max_lorentz",
    "limited_theta1", "limited_theta2", "vacuum_cells", "min_face_theta", "retries",
]


def write_snapshot_binary(path, w, spacing=(0.0, 0.0, 0.0), time=0.0):
    w = np.asarray(w, dtype="<f8")
    dims = w.shape[:-1]
    if len(dims) == 1:
        dims = (dims[0], 1, 1)
    payload = np.moveaxis(w.reshape(dims + (5,)), -1, 0)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, *dims, *map(float, spacing), float(time)))
        fh.write(np.ascontiguousarray(payload).tobytes())


def read_snapshot_binary(path):
    """Return ``(w, spacing, time)`` with ``w`` of shape ``dims + (5,)``."""
    raw = Path(path).read_bytes()
    magic, n1, n2, n3, s1, s2, s3, time = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a snapshot file")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    w = np.moveaxis(data.reshape(5, n1, n2, n3), 0, -1).copy()
    return w, np.array([s1, s2, s3]), time


def write_snapshot_csv(path, w, ms, eos):
    w = np.asarray(w, dtype=float)
    flat_w = w.reshape(-1, 5)
    ms_flat = ms.reshape((flat_w.shape[0],))
    u = w_to_u(flat_w, ms_flat)
    prim = conserved_to_primitives(u, ms_flat, eos)
    q = q_star(flat_w)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SNAPSHOT_COLUMNS)
        for i in range(flat_w.shape[0]):
            writer.writerow(
                [i, *map(repr, flat_w[i].tolist()), repr(float(prim.rho[i])),
                 *map(repr, prim.v_up[i].tolist()), repr(float(prim.p[i])), repr(float(q[i]))]
            )


class DiagnosticsWriter:
    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w", newline="")
        self._writer = csv.DictWriter(self._fh, fieldnames=DIAGNOSTIC_COLUMNS)
        self._writer.writeheader()

    def write(self, row: dict):
        self._writer.writerow({k: _fmt(row.get(k, "")) for k in DIAGNOSTIC_COLUMNS})

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return x


def write_order_table(path, rows):
    cols = ["scheme", "n", "dx", "l1_error", "order", "min_face_theta"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols)
        writer.writeheader()
        for r in rows:
            writer.writerow({k: _fmt(r.get(k, "")) for k in cols})
