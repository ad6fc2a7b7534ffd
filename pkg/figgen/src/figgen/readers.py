"""Readers for the simulator's on-disk formats.

Formats (independent reimplementation; the simulator is not imported):

* energy log: whitespace-separated text, one header row naming the columns,
  then one row per time step.
* refinement report: ``#``-prefixed header lines, then ``level err_A err_B
  err_S`` rows, then a ``# fitted slopes: ...`` trailer.
* snapshot: little-endian binary, 8-byte magic ``PHFLD1\\x00\\x00``, header
  ``<IIIdddI`` = (version, nx, ny, hx, hy, t, nfields), length-prefixed UTF-8
  field names, then nfields row-major float64 arrays.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SNAPSHOT_MAGIC = b"PHFLD1\x00\x00"


@dataclass(frozen=True)
class EnergyLog:
    columns: tuple
    data: np.ndarray  # (n_steps, n_columns)

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.data[:, self.columns.index(name)]
        except ValueError as exc:
            raise KeyError(f"energy log has no column {name!r}") from exc


@dataclass(frozen=True)
class RefinementReport:
    axis: str
    scheme: str
    levels: np.ndarray          # (n_rows,)
    errors: np.ndarray          # (n_rows, n_species)
    reported_slopes: np.ndarray


@dataclass(frozen=True)
class Snapshot:
    t: float
    nx: int
    ny: int
    hx: float
    hy: float
    fields: dict  # name -> (nx, ny) array


def read_energy_log(path) -> EnergyLog:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty energy log")
    columns = tuple(lines[0].split())
    required = {"t", "energy", "mean_A", "mean_B", "mean_S"}
    missing = required - set(columns)
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    rows = [line.split() for line in lines[1:] if line.strip()]
    data = np.array(rows, dtype=float) if rows else np.empty((0, len(columns)))
    if data.size and data.shape[1] != len(columns):
        raise ValueError(f"{path}: ragged rows in energy log")
    return EnergyLog(columns=columns, data=data)


def read_refinement_report(path) -> RefinementReport:
    axis = scheme = None
    slopes: list = []
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if body.startswith("refinement"):
                for tok in body.split()[1:]:
                    key, _, val = tok.partition("=")
                    if key == "axis":
                        axis = val
                    elif key == "scheme":
                        scheme = val
            elif body.startswith("fitted slopes:"):
                slopes = [float(v) for v in body.split(":", 1)[1].split()]
            continue
        rows.append([float(v) for v in line.split()])
    if axis is None or scheme is None:
        raise ValueError(f"{path}: missing refinement header line")
    if len(rows) < 1:
        raise ValueError(f"{path}: report has no data rows")
    table = np.array(rows)
    return RefinementReport(axis=axis, scheme=scheme,
                            levels=table[:, 0], errors=table[:, 1:],
                            reported_slopes=np.array(slopes))


def read_snapshot(path) -> Snapshot:
    data = Path(path).read_bytes()
    if data[:8] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not a snapshot file")
    off = 8
    header = struct.unpack_from("<IIIdddI", data, off)
    off += struct.calcsize("<IIIdddI")
    version, nx, ny, hx, hy, t, nfields = header
    if version != 1:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    names = []
    for _ in range(nfields):
        (ln,) = struct.unpack_from("<I", data, off)
        off += 4
        names.append(data[off:off + ln].decode("utf-8"))
        off += ln
    expected = off + nfields * nx * ny * 8
    if len(data) != expected:
        raise ValueError(f"{path}: truncated snapshot ({len(data)} != {expected})")
    fields = {}
    for name in names:
        arr = np.frombuffer(data, dtype="<f8", count=nx * ny, offset=off)
        fields[name] = arr.reshape(nx, ny).copy()
        off += nx * ny * 8
    return Snapshot(t=t, nx=nx, ny=ny, hx=hx, hy=hy, fields=fields)
