"""TTAG1 binary time-tag files and CSV import.

TTAG1 layout (little-endian, packed, see docs/formats.md):

    magic   5 bytes  b"TTAG1"
    version u16      currently 1
    resolution_ns u32
    n_channels    u8
    n_runs        u32
    duration_ns   u64
    records       (run_id u32, channel u8, t_ns u64) x N, sorted by (run_id, t_ns)

Strict reads verify sortedness and bounds; lenient reads repair ordering
with a warning.  write(read(f)) is byte-identical for strict-valid files.
"""

from __future__ import annotations

import csv
import warnings as _warnings
import struct
from pathlib import Path

import numpy as np

from photonstat.model import TimeTagStream

MAGIC = b"TTAG1"
VERSION = 1
_HEADER = struct.Struct("<5sHIBIQ")
_RECORD_DTYPE = np.dtype([("run_id", "<u4"), ("channel", "u1"), ("t_ns", "<u8")])
assert _RECORD_DTYPE.itemsize == 13


class TtagFormatError(ValueError):
    pass


def write_ttag(stream: TimeTagStream, path) -> None:
    rec = np.empty(len(stream), dtype=_RECORD_DTYPE)
    rec["run_id"] = stream.run_id
    rec["channel"] = stream.channel
    rec["t_ns"] = stream.t_ns
    header = _HEADER.pack(MAGIC, VERSION, stream.resolution_ns, stream.n_channels,
                          stream.n_runs, stream.duration_ns)
    with open(path, "wb") as f:
        f.write(header)
        f.write(rec.tobytes())


def read_ttag(path, strict: bool = True) -> TimeTagStream:
    """Read a TTAG1 file; ``strict`` rejects unsorted tags, lenient repairs them."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise TtagFormatError(f"file too short for header: {len(data)} bytes")
    magic, version, resolution_ns, n_channels, n_runs, duration_ns = \
        _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise TtagFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise TtagFormatError(f"unsupported version {version}")
    body = len(data) - _HEADER.size
    if body % _RECORD_DTYPE.itemsize != 0:
        good = _HEADER.size + (body // _RECORD_DTYPE.itemsize) * _RECORD_DTYPE.itemsize
        raise TtagFormatError(
            f"truncated record at byte offset {good}: {len(data) - good} trailing bytes")
    rec = np.frombuffer(data, dtype=_RECORD_DTYPE, offset=_HEADER.size)
    try:
        return TimeTagStream(rec["run_id"], rec["channel"], rec["t_ns"],
                             duration_ns=duration_ns, n_runs=n_runs,
                             n_channels=n_channels, resolution_ns=resolution_ns,
                             sort=False)
    except ValueError as err:
        if strict or "sort" not in str(err):
            raise TtagFormatError(f"invalid TTAG1 content: {err}") from err
        _warnings.warn(f"{path}: tags out of order, repaired on read")
        return TimeTagStream(rec["run_id"], rec["channel"], rec["t_ns"],
                             duration_ns=duration_ns, n_runs=n_runs,
                             n_channels=n_channels, resolution_ns=resolution_ns,
                             sort=True)


_TIME_SCALES_NS = {"s": 1e9, "ms": 1e6, "us": 1e3, "ns": 1.0}


def import_csv(path, run_column="run", channel_column="channel",
               time_column="time", time_unit="ns", max_bad_fraction=0.01,
               duration_ns=None, n_runs=None, n_channels=None) -> TimeTagStream:
    """Import time tags from CSV with declared columns and time unit.

    Times convert to integer nanoseconds; rows are sorted on import
    (count preserved).  Unparseable or negative-time rows are reported with
    their line numbers; more than ``max_bad_fraction`` bad rows aborts.
    """
    if time_unit not in _TIME_SCALES_NS:
        raise ValueError(f"unknown time unit {time_unit!r}; use one of {sorted(_TIME_SCALES_NS)}")
    scale = _TIME_SCALES_NS[time_unit]
    runs, channels, times, bad = [], [], [], []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: no header row")
        for col in (run_column, channel_column, time_column):
            if col not in reader.fieldnames:
                raise ValueError(f"{path}: missing column {col!r}")
        for lineno, row in enumerate(reader, start=2):
            try:
                t = float(row[time_column]) * scale
                if t < 0:
                    raise ValueError("negative time")
                runs.append(int(row[run_column]))
                channels.append(int(row[channel_column]))
                times.append(int(round(t)))
            except (ValueError, TypeError) as err:
                bad.append((lineno, str(err)))
    total = len(runs) + len(bad)
    if bad:
        detail = "; ".join(f"line {ln}: {msg}" for ln, msg in bad[:5])
        if total == 0 or len(bad) / total > max_bad_fraction:
            raise ValueError(f"{path}: {len(bad)}/{total} bad rows ({detail})")
        _warnings.warn(f"{path}: skipped {len(bad)} bad rows ({detail})")
    runs = np.asarray(runs, dtype=np.int64)
    channels = np.asarray(channels, dtype=np.int64)
    times = np.asarray(times, dtype=np.int64)
    if duration_ns is None:
        duration_ns = int(times.max()) + 1 if times.size else 1
    if n_runs is None:
        n_runs = int(runs.max()) + 1 if runs.size else 1
    if n_channels is None:
        n_channels = max(int(channels.max()) + 1 if channels.size else 1, 1)
    return TimeTagStream(runs, channels, times, duration_ns=duration_ns,
                         n_runs=n_runs, n_channels=n_channels, sort=True)
