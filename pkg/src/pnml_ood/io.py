"""File formats.

Matrix files (embeddings, logits) come in two flavours, told apart by the
first four bytes:

* text: comma-separated values, one sample per line, with at most one
  leading header line starting with ``#``;
* binary: ``b"PNML"``, version byte ``0x01``, N and M as little-endian
  uint64, then N*M little-endian float32 values, row-major.

Statistics files store the eigenbasis in float64 so that kernels rebuilt on
load are identical to the ones computed originally::

    b"PNST" | u8 version | u8 flags | u64 M | u64 n_train | u64 rank
    | f64 rank_tol_factor | M x f64 eigvals | M*M x f64 eigvecs (row-major)

flags bit 0 marks statistics computed from L2-normalized rows.
"""

from __future__ import annotations

import contextlib
import csv
import io as _io
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import FormatError
from .linalg_core import EigenBasis, PnmlStats, build_stats

__all__ = [
    "EMBED_MAGIC",
    "STATS_MAGIC",
    "atomic_write",
    "format_float",
    "read_matrix",
    "write_matrix_text",
    "write_matrix_binary",
    "matrix_to_binary",
    "read_stats",
    "write_stats",
    "stats_to_bytes",
    "stats_from_bytes",
    "write_csv",
    "read_score_column",
    "write_json",
]

EMBED_MAGIC = b"PNML"
STATS_MAGIC = b"PNST"
FORMAT_VERSION = 1
_EMBED_HEADER = struct.Struct("<4sBQQ")
_STATS_HEADER = struct.Struct("<4sBBQQQd")
_FLAG_NORMALIZED = 0x01


def format_float(x: float) -> str:
    """Shortest decimal form of ``x`` with at most 12 significant digits."""
    s = format(float(x), ".12g")
    return "0" if s == "-0" else s


@contextlib.contextmanager
def atomic_write(path, mode="w"):
    """Write to a temporary sibling and rename over ``path`` on success."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        kwargs = {"newline": ""} if "b" not in mode else {}
        with os.fdopen(fd, mode, **kwargs) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


# -- matrices -----------------------------------------------------------------


def matrix_to_binary(data) -> bytes:
    a = np.asarray(data, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    n, m = a.shape
    return _EMBED_HEADER.pack(EMBED_MAGIC, FORMAT_VERSION, n, m) + a.astype("<f4").tobytes(order="C")


def write_matrix_binary(path, data) -> None:
    payload = matrix_to_binary(data)
    with atomic_write(path, "wb") as fh:
        fh.write(payload)


def write_matrix_text(path, data, header: str | None = None) -> None:
    a = np.asarray(data, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    with atomic_write(path, "w") as fh:
        if header is not None:
            fh.write(header if header.startswith("#") else "# " + header)
            fh.write("\n")
        for row in a:
            fh.write(",".join(format_float(v) for v in row))
            fh.write("\n")


def _parse_binary(raw: bytes, path):
    if len(raw) < _EMBED_HEADER.size:
        raise FormatError(f"truncated header ({len(raw)} of {_EMBED_HEADER.size} bytes)", path, offset=len(raw))
    magic, version, n, m = _EMBED_HEADER.unpack_from(raw)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}", path, offset=4)
    if n < 1 or m < 1:
        raise FormatError(f"empty matrix declared ({n} x {m})", path, offset=5)
    expected = n * m * 4
    payload = len(raw) - _EMBED_HEADER.size
    if payload != expected:
        raise FormatError(
            f"declared {n} x {m} needs {expected} payload bytes, found {payload}",
            path,
            offset=_EMBED_HEADER.size,
        )
    data = np.frombuffer(raw, dtype="<f4", offset=_EMBED_HEADER.size).reshape(n, m)
    bad = np.flatnonzero(~np.isfinite(data.ravel()))
    if bad.size:
        raise FormatError("non-finite value", path, offset=_EMBED_HEADER.size + 4 * int(bad[0]))
    return data.astype(np.float64)


def _parse_text(raw: bytes, path):
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError("not UTF-8 text and no binary magic", path, offset=exc.start) from None
    rows = []
    width = None
    offset = 0
    for lineno, line in enumerate(text.splitlines(keepends=True), start=1):
        start = offset
        offset += len(line.encode("utf-8"))
        body = line.strip()
        if not body:
            continue
        if body.startswith("#"):
            if rows or lineno != 1:
                raise FormatError("header line allowed only as the first line", path, offset=start, line=lineno)
            continue
        fields = body.split(",")
        try:
            values = [float(f) for f in fields]
        except ValueError:
            raise FormatError(f"cannot parse {body[:40]!r} as numbers", path, offset=start, line=lineno) from None
        if not all(np.isfinite(values)):
            raise FormatError("non-finite value", path, offset=start, line=lineno)
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise FormatError(f"expected {width} columns, found {len(values)}", path, offset=start, line=lineno)
        rows.append(values)
    if not rows:
        raise FormatError("no data rows", path, offset=len(raw))
    return np.array(rows, dtype=np.float64)


def read_matrix(path) -> np.ndarray:
    """Load a text or binary matrix file as a float64 (N, M) array."""
    raw = Path(path).read_bytes()
    if raw[:4] == EMBED_MAGIC:
        return _parse_binary(raw, path)
    return _parse_text(raw, path)


# -- statistics ---------------------------------------------------------------


def stats_to_bytes(stats: PnmlStats) -> bytes:
    b = stats.basis
    m = b.dim
    flags = _FLAG_NORMALIZED if stats.normalized else 0
    head = _STATS_HEADER.pack(STATS_MAGIC, FORMAT_VERSION, flags, m, stats.n_train, b.rank, b.rank_tol_factor)
    return (
        head
        + np.ascontiguousarray(b.eigvals, dtype="<f8").tobytes()
        + np.ascontiguousarray(b.eigvecs, dtype="<f8").tobytes()
    )


def stats_from_bytes(raw: bytes, path=None) -> PnmlStats:
    hs = _STATS_HEADER.size
    if len(raw) < hs:
        raise FormatError(f"truncated stats header ({len(raw)} of {hs} bytes)", path, offset=len(raw))
    magic, version, flags, m, n_train, rank, tol = _STATS_HEADER.unpack_from(raw)
    if magic != STATS_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {STATS_MAGIC!r}", path, offset=0)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported stats version {version}", path, offset=4)
    if flags & ~_FLAG_NORMALIZED:
        raise FormatError(f"unknown flag bits 0x{flags:02x}", path, offset=5)
    if m < 1 or rank > m:
        raise FormatError(f"invalid dimensions M={m}, rank={rank}", path, offset=6)
    if not (np.isfinite(tol) and tol > 0):
        raise FormatError(f"invalid rank tolerance {tol!r}", path, offset=30)
    expected = hs + 8 * (m + m * m)
    if len(raw) != expected:
        raise FormatError(f"expected {expected} bytes for M={m}, found {len(raw)}", path, offset=min(len(raw), expected))
    vals = np.frombuffer(raw, dtype="<f8", count=m, offset=hs).astype(np.float64)
    vecs = np.frombuffer(raw, dtype="<f8", count=m * m, offset=hs + 8 * m).reshape(m, m).astype(np.float64)
    if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(vecs))):
        raise FormatError("non-finite eigen data", path, offset=hs)
    basis = EigenBasis(eigvecs=vecs, eigvals=vals, rank=rank, rank_tol_factor=tol)
    return build_stats(basis, n_train, normalized=bool(flags & _FLAG_NORMALIZED))


def write_stats(path, stats: PnmlStats) -> None:
    payload = stats_to_bytes(stats)
    with atomic_write(path, "wb") as fh:
        fh.write(payload)


def read_stats(path) -> PnmlStats:
    return stats_from_bytes(Path(path).read_bytes(), path)


# -- tables and reports -------------------------------------------------------


def write_csv(path, header, rows) -> None:
    """CSV with fixed float formatting; ints are written as ints."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, (int, np.integer, str)) else format_float(v) for v in row])
    with atomic_write(path, "w") as fh:
        fh.write(buf.getvalue())


def read_score_column(path, column: str) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in reader.fieldnames:
            found = ", ".join(reader.fieldnames or [])
            raise FormatError(f"missing column {column!r} (found: {found})", path, line=1)
        out = []
        for lineno, row in enumerate(reader, start=2):
            try:
                out.append(float(row[column]))
            except (TypeError, ValueError):
                raise FormatError(f"bad value {row[column]!r} in column {column!r}", path, line=lineno) from None
    if not out:
        raise FormatError("no data rows", path, line=2)
    return np.array(out)


def write_json(path, obj) -> None:
    text = json.dumps(obj, indent=2, sort_keys=False) + "\n"
    with atomic_write(path, "w") as fh:
        fh.write(text)
