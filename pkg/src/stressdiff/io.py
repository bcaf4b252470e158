"""Binary field snapshots and CSV time series.

Snapshot files hold a sequence of field records. Each record is

====================  ==========================================
bytes                 content
====================  ==========================================
8                     magic ``b"SDFIELD\\x01"``
4                     endianness marker ``0x01020304`` (uint32, little endian)
4                     ``dim`` (uint32 LE)
4                     ``M`` points per axis (uint32 LE)
8                     time (float64 LE)
4                     ``n`` length of the field name in bytes (uint32 LE)
n                     field name, UTF-8
8 * M**dim            samples, float64 LE, row-major (C) axis order
====================  ==========================================

A state is stored as the records ``rho``, ``u_0`` ... ``u_{dim-1}``, ``b``.
"""

import csv
from io import StringIO
import os
from pathlib import Path
import struct

import numpy as np

from .errors import StressDiffError
from .grid import GridSpec
from .state import State

MAGIC = b"SDFIELD\x01"
ENDIAN_MARKER = 0x01020304
_HEADER = struct.Struct("<8sIIIdI")
SNAPSHOT_SUFFIX = ".sdf"
CSV_FORMAT = "{:.17g}"


class SnapshotFormatError(StressDiffError):
    pass


def encode_field(name, values, time):
    """One field record as bytes."""
    a = np.asarray(values, dtype="<f8")
    dim = a.ndim
    M = a.shape[0] if dim else 0
    if dim not in (1, 2, 3) or any(n != M for n in a.shape):
        raise ValueError(f"field {name!r} must be a cube of samples, got shape {a.shape}")
    raw_name = name.encode("utf-8")
    head = _HEADER.pack(MAGIC, ENDIAN_MARKER, dim, M, float(time), len(raw_name))
    return head + raw_name + np.ascontiguousarray(a).tobytes(order="C")


def decode_fields(data):
    """Parse every record in ``data``; returns a list of ``(name, time, array)``."""
    out = []
    pos = 0
    while pos < len(data):
        if len(data) - pos < _HEADER.size:
            raise SnapshotFormatError(f"truncated header at byte {pos}")
        magic, marker, dim, M, time, n = _HEADER.unpack_from(data, pos)
        if magic != MAGIC:
            raise SnapshotFormatError(f"bad magic at byte {pos}")
        if marker != ENDIAN_MARKER:
            raise SnapshotFormatError(f"unexpected endianness marker {marker:#010x}")
        pos += _HEADER.size
        name = data[pos:pos + n].decode("utf-8")
        pos += n
        count = M**dim
        end = pos + 8 * count
        if end > len(data):
            raise SnapshotFormatError(f"truncated samples for field {name!r}")
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=pos).reshape((M,) * dim)
        out.append((name, time, arr.astype(float)))
        pos = end
    return out


def state_records(state):
    names = ["rho"] + [f"u_{i}" for i in range(state.grid.dim)] + ["b"]
    arrays = [state.rho] + list(state.u) + [state.b]
    return b"".join(encode_field(n, a, state.time) for n, a in zip(names, arrays))


def write_state(path, state):
    Path(path).write_bytes(state_records(state))


def read_state(path, dealias_fraction=None):
    """Rebuild a State from a snapshot file written by :func:`write_state`."""
    recs = {name: (t, a) for name, t, a in decode_fields(Path(path).read_bytes())}
    if "rho" not in recs or "b" not in recs:
        raise SnapshotFormatError(f"{path}: missing rho or b record")
    time, rho = recs["rho"]
    kw = {} if dealias_fraction is None else {"dealias_fraction": dealias_fraction}
    grid = GridSpec(rho.ndim, rho.shape[0], **kw)
    try:
        u = np.stack([recs[f"u_{i}"][1] for i in range(grid.dim)])
    except KeyError as exc:
        raise SnapshotFormatError(f"{path}: missing velocity record {exc}") from None
    return State(grid, time, rho, u, recs["b"][1])


def snapshot_name(index):
    return f"snapshot_{index:06d}{SNAPSHOT_SUFFIX}"


def list_snapshots(directory):
    files = sorted(Path(directory).glob("snapshot_*" + SNAPSHOT_SUFFIX))
    if not files:
        raise FileNotFoundError(f"no snapshots in {directory}")
    return files


def read_window(directory, dealias_fraction=None):
    return [read_state(f, dealias_fraction) for f in list_snapshots(directory)]


# -- CSV --------------------------------------------------------------------------

def _cell(v):
    if isinstance(v, bool) or v is None:
        return str(v).lower() if isinstance(v, bool) else ""
    if isinstance(v, (float, np.floating)):
        return CSV_FORMAT.format(float(v))
    return str(v)


def format_csv(header, rows):
    """CSV text with a fixed header; floats carry 17 significant digits."""
    buf = StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        if len(r) != len(header):
            raise ValueError(f"row has {len(r)} cells, header has {len(header)}")
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def write_csv(path, header, rows):
    Path(path).write_text(format_csv(header, rows), encoding="utf-8")


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return Path(path)
