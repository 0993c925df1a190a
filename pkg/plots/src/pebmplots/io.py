"""Readers for the solver's on-disk run artifacts.

The solver writes four kinds of files, all with fixed documented layouts:

* energy trace -- CSV, one row per accepted time step, with squared norms,
  squared gradient norms, the fifth-power sink integral, forcing work rates,
  squared forcing norms, per-step dissipation/work/sink increments, and the
  maximum vertically-averaged horizontal divergence;
* difference trace -- CSV tracking the squared separation of two runs
  component by component, the squared gradient separation, and the
  instantaneous growth weight used by the separation bound;
* orbit residuals -- CSV, one row per fixed-point iteration of the
  period map, with the iteration index, the map residual, and the weighted
  energy of the current iterate;
* state snapshot -- binary, a little-endian header (magic ``b"PEBM"``,
  format version, grid shape, time) followed by the velocity, temperature,
  and surface fields as float64 C-order arrays and an 8-byte truncated
  SHA-256 checksum of everything before it.

This module reimplements the parsers for those layouts from the format
documentation alone, so the package works on archived run directories
without importing the solver.  Every malformed input raises
:class:`ArtifactError` (or ``OSError`` for unreadable paths) before any
output is produced.
"""

from __future__ import annotations

import csv
import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "ArtifactError",
    "ENERGY_COLUMNS",
    "DIFFERENCE_COLUMNS",
    "RESIDUAL_COLUMNS",
    "TraceFrame",
    "Snapshot",
    "read_energy_trace",
    "read_difference_trace",
    "read_orbit_residuals",
    "read_snapshot",
]


class ArtifactError(RuntimeError):
    """A run artifact is malformed, truncated, or internally inconsistent."""


ENERGY_COLUMNS = (
    "t",
    "v_sq",
    "T_sq",
    "rho_sq",
    "grad_v_sq",
    "grad_T_sq",
    "grad_rho_sq",
    "rho_l5",
    "work_v",
    "work_T",
    "work_rho",
    "f1_sq",
    "f2_sq",
    "f3_sq",
    "diss_inc",
    "work_inc",
    "sink_inc",
    "div_max",
)

DIFFERENCE_COLUMNS = (
    "t",
    "sigma_v_sq",
    "sigma_T_sq",
    "sigma_rho_sq",
    "sigma_grad_sq",
    "g_weight",
)

RESIDUAL_COLUMNS = ("iteration", "residual", "weighted_energy")


@dataclass(frozen=True)
class TraceFrame:
    """Parsed CSV trace: an ordered set of equal-length float columns."""

    path: str
    columns: tuple[str, ...]
    data: dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.data[name]
        except KeyError:
            raise ArtifactError(
                f"{self.path}: no column named {name!r}"
            ) from None

    def __len__(self) -> int:
        return len(self.data[self.columns[0]])

    def __contains__(self, name: str) -> bool:
        return name in self.data


@dataclass(frozen=True)
class Snapshot:
    """Parsed binary state snapshot."""

    path: str
    nx: int
    ny: int
    nz: int
    t: float
    v: np.ndarray      # (2, nx, ny, nz) horizontal velocity components
    T: np.ndarray      # (nx, ny, nz) temperature
    rho: np.ndarray    # (nx, ny) surface field


def _read_trace(path: str | Path, columns: tuple[str, ...]) -> TraceFrame:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ArtifactError(f"{path}: empty file, expected a CSV header")
        if tuple(header) != columns:
            raise ArtifactError(
                f"{path}: unexpected columns {header!r}, "
                f"expected {list(columns)!r}"
            )
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(columns):
                raise ArtifactError(
                    f"{path}: line {lineno} has {len(row)} fields, "
                    f"expected {len(columns)}"
                )
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                raise ArtifactError(
                    f"{path}: line {lineno} contains a non-numeric field"
                ) from None
    table = (
        np.array(rows, dtype=np.float64)
        if rows
        else np.empty((0, len(columns)), dtype=np.float64)
    )
    data = {name: table[:, j].copy() for j, name in enumerate(columns)}
    return TraceFrame(path=str(path), columns=columns, data=data)


def read_energy_trace(path: str | Path) -> TraceFrame:
    """Read an energy trace CSV written during time integration."""
    return _read_trace(path, ENERGY_COLUMNS)


def read_difference_trace(path: str | Path) -> TraceFrame:
    """Read a two-run difference trace CSV."""
    return _read_trace(path, DIFFERENCE_COLUMNS)


def read_orbit_residuals(path: str | Path) -> TraceFrame:
    """Read the per-iteration residual table of a period-map solve."""
    frame = _read_trace(path, RESIDUAL_COLUMNS)
    it = frame["iteration"]
    if len(frame) and not np.array_equal(it, np.round(it)):
        raise ArtifactError(
            f"{frame.path}: iteration column contains non-integer values"
        )
    return frame


_HEADER_STRUCT = struct.Struct("<4sIIIId")
_MAGIC = b"PEBM"
_VERSION = 1
_CHECKSUM_BYTES = 8


def read_snapshot(path: str | Path) -> Snapshot:
    """Read and verify a binary state snapshot.

    Verifies, in order: the file is long enough to hold a header, the magic
    bytes, the format version, the exact file size implied by the grid
    shape in the header, and the trailing truncated SHA-256 checksum.
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER_STRUCT.size:
        raise ArtifactError(
            f"{path}: truncated snapshot ({len(raw)} bytes, "
            f"header needs {_HEADER_STRUCT.size})"
        )
    magic, version, nx, ny, nz, t = _HEADER_STRUCT.unpack_from(raw, 0)
    if magic != _MAGIC:
        raise ArtifactError(f"{path}: bad magic bytes {magic!r}")
    if version != _VERSION:
        raise ArtifactError(
            f"{path}: unsupported snapshot version {version}"
        )
    counts = (2 * nx * ny * nz, nx * ny * nz, nx * ny)
    payload_bytes = 8 * sum(counts)
    expected = _HEADER_STRUCT.size + payload_bytes + _CHECKSUM_BYTES
    if len(raw) != expected:
        raise ArtifactError(
            f"{path}: wrong size for a {nx}x{ny}x{nz} snapshot "
            f"({len(raw)} bytes, expected {expected})"
        )
    body = raw[: _HEADER_STRUCT.size + payload_bytes]
    checksum = hashlib.sha256(body).digest()[:_CHECKSUM_BYTES]
    if raw[-_CHECKSUM_BYTES:] != checksum:
        raise ArtifactError(f"{path}: checksum mismatch, file is corrupt")
    flat = np.frombuffer(
        raw, dtype="<f8", count=sum(counts), offset=_HEADER_STRUCT.size
    )
    off = 0
    v = flat[off : off + counts[0]].reshape(2, nx, ny, nz).copy()
    off += counts[0]
    T = flat[off : off + counts[1]].reshape(nx, ny, nz).copy()
    off += counts[1]
    rho = flat[off : off + counts[2]].reshape(nx, ny).copy()
    return Snapshot(
        path=str(path), nx=nx, ny=ny, nz=nz, t=float(t), v=v, T=T, rho=rho
    )
