"""Binary profile/field formats and JSON/CSV helpers.

NLSP (radial profile), little endian:
    b"NLSP", u32 version, f64 α, u32 n, f64 r_max, then n f64 values,
    n f64 ∂_rφ, n f64 ∂_αφ.
NLSF (spinor snapshot), little endian:
    b"NLSF", u32 n1, u32 n2, u32 n3, f64 L, f64 t, then interleaved (re, im)
    f64 pairs for z1 followed by z2, C order.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .ground_state import RadialGrid, RadialProfile
from .grid import Grid3D, SpinorField

NLSP_VERSION = 1


def _open(path, mode):
    try:
        return open(path, mode)
    except OSError as exc:
        raise FormatError(f"cannot open {path}: {exc}") from exc


def write_profile(p: RadialProfile, path) -> None:
    n = p.grid.n_points
    with _open(path, "wb") as fh:
        fh.write(b"NLSP")
        fh.write(struct.pack("<IdId", NLSP_VERSION, p.alpha, n, p.grid.r_max))
        for arr in (p.values, p.d_r, p.d_alpha):
            fh.write(np.asarray(arr, dtype="<f8").tobytes())


def read_profile(path) -> RadialProfile:
    with _open(path, "rb") as fh:
        data = fh.read()
    head = struct.calcsize("<IdId")
    if len(data) < 4 + head or data[:4] != b"NLSP":
        raise FormatError(f"{path} is not an NLSP file")
    version, alpha, n, r_max = struct.unpack("<IdId", data[4:4 + head])
    if version != NLSP_VERSION:
        raise FormatError(f"unsupported NLSP version {version}")
    body = np.frombuffer(data[4 + head:], dtype="<f8")
    if body.size != 3 * n:
        raise FormatError(f"NLSP body has {body.size} values, expected {3 * n}")
    vals, dr, da = (body[i * n:(i + 1) * n].astype(float) for i in range(3))
    return RadialProfile(RadialGrid(r_max, n), alpha, vals, dr, da)


def write_field(Z: SpinorField, path) -> None:
    g = Z.grid
    with _open(path, "wb") as fh:
        fh.write(b"NLSF")
        fh.write(struct.pack("<IIIdd", g.n, g.n, g.n, g.L, Z.t))
        for z in (Z.z1, Z.z2):
            fh.write(np.ascontiguousarray(z, dtype="<c16").tobytes())


def read_field(path) -> SpinorField:
    with _open(path, "rb") as fh:
        data = fh.read()
    head = struct.calcsize("<IIIdd")
    if len(data) < 4 + head or data[:4] != b"NLSF":
        raise FormatError(f"{path} is not an NLSF file")
    n1, n2, n3, L, t = struct.unpack("<IIIdd", data[4:4 + head])
    if not n1 == n2 == n3:
        raise FormatError("only cubic NLSF grids are supported")
    body = np.frombuffer(data[4 + head:], dtype="<c16")
    m = n1 * n2 * n3
    if body.size != 2 * m:
        raise FormatError(f"NLSF body has {body.size} values, expected {2 * m}")
    g = Grid3D(n1, L)
    return SpinorField(g, body[:m].reshape(g.shape).copy(), body[m:].reshape(g.shape).copy(), t)


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def write_json(obj, path) -> None:
    try:
        Path(path).write_text(json.dumps(obj, indent=2, default=_default, allow_nan=True))
    except OSError as exc:
        raise FormatError(f"cannot write {path}: {exc}") from exc


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc


def write_rows_csv(rows: list, path) -> None:
    import csv
    keys: list = []
    for r in rows:
        for k in r:
            if k not in keys:
                keys.append(k)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys)
            w.writeheader()
            w.writerows(rows)
    except OSError as exc:
        raise FormatError(f"cannot write {path}: {exc}") from exc
