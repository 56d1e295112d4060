"""Binary field dumps.

Format: one ASCII header line ``CAPELAST1 nx ny nz b kind`` followed by
little-endian 64-bit floats in x-fastest order.  ``kind`` is ``volume`` or
``surface``; surface dumps still record the full grid in the header.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import ConfigError

MAGIC = "CAPELAST1"


def write_field(path, f: np.ndarray, nx: int, ny: int, nz: int, b: float):
    kind = "volume" if f.ndim == 3 else "surface"
    header = f"{MAGIC} {nx} {ny} {nz} {b!r} {kind}\n"
    if kind == "volume":
        flat = np.ascontiguousarray(f.transpose(2, 1, 0), dtype="<f8")
    else:
        flat = np.ascontiguousarray(f.T, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(flat.tobytes())


def read_field(path):
    """Returns (array, meta dict with nx, ny, nz, b, kind)."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").strip()
        raw = fh.read()
    parts = header.split()
    if len(parts) != 6 or parts[0] != MAGIC:
        raise ConfigError(f"not a {MAGIC} field file: {path}")
    nx, ny, nz = int(parts[1]), int(parts[2]), int(parts[3])
    b = float(parts[4])
    kind = parts[5]
    data = np.frombuffer(raw, dtype="<f8")
    if kind == "volume":
        if data.size != nx * ny * nz:
            raise ConfigError(f"volume dump size mismatch in {path}")
        arr = data.reshape(nz, ny, nx).transpose(2, 1, 0).copy()
    elif kind == "surface":
        if data.size != nx * ny:
            raise ConfigError(f"surface dump size mismatch in {path}")
        arr = data.reshape(ny, nx).T.copy()
    else:
        raise ConfigError(f"unknown field kind {kind!r} in {path}")
    return arr, {"nx": nx, "ny": ny, "nz": nz, "b": b, "kind": kind}


def write_manifest(path, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> dict:
    if not os.path.exists(path):
        raise ConfigError(f"missing manifest {path}")
    with open(path) as fh:
        return json.load(fh)
