"""Binary state snapshots.

Fixed little-endian layout, independent of host byte order:

    offset  size              content
    0       4                 magic b"PEBM"
    4       4                 format version (currently 1), uint32
    8       12                nx, ny, nz as uint32
    20      8                 time t, float64
    28      8*N               payload: v (2,nx,ny,nz), T (nx,ny,nz),
                              rho (nx,ny), C order, float64
    28+8N   8                 first 8 bytes of SHA-256 over bytes [0, 28+8N)

The trailing checksum makes silent truncation or corruption detectable, and
the whole format is easy to reimplement elsewhere (plain offsets, standard
hash).  Loading verifies magic, version, size, and checksum before touching
the payload, so a failed load never produces a partial state.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from .fields import State

MAGIC = b"PEBM"
VERSION = 1
_HEADER = struct.Struct("<4sIIIId")


class SnapshotError(RuntimeError):
    """Malformed, truncated, or corrupted snapshot file."""


def save_snapshot(path, state: State) -> None:
    nx, ny, nz = state.T.shape
    header = _HEADER.pack(MAGIC, VERSION, nx, ny, nz, float(state.t))
    payload = b"".join(
        np.ascontiguousarray(arr, dtype="<f8").tobytes()
        for arr in (state.v, state.T, state.rho))
    body = header + payload
    checksum = hashlib.sha256(body).digest()[:8]
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(checksum)


def load_snapshot(path) -> State:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size + 8:
        raise SnapshotError(f"{path}: truncated snapshot ({len(raw)} bytes)")
    magic, version, nx, ny, nz, t = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise SnapshotError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(
            f"{path}: unsupported format version {version} (expected {VERSION})")
    n_payload = 8 * (2 * nx * ny * nz + nx * ny * nz + nx * ny)
    expected = _HEADER.size + n_payload + 8
    if len(raw) != expected:
        raise SnapshotError(
            f"{path}: wrong size {len(raw)} bytes for grid "
            f"({nx}, {ny}, {nz}); expected {expected}")
    body, checksum = raw[:-8], raw[-8:]
    digest = hashlib.sha256(body).digest()[:8]
    if digest != checksum:
        raise SnapshotError(
            f"{path}: checksum mismatch (stored {checksum.hex()}, "
            f"computed {digest.hex()})")
    flat = np.frombuffer(raw, dtype="<f8", count=n_payload // 8,
                         offset=_HEADER.size).astype(np.float64)
    nv = 2 * nx * ny * nz
    nT = nx * ny * nz
    v = flat[:nv].reshape(2, nx, ny, nz).copy()
    T = flat[nv:nv + nT].reshape(nx, ny, nz).copy()
    rho = flat[nv + nT:].reshape(nx, ny).copy()
    return State(v=v, T=T, rho=rho, t=t)
