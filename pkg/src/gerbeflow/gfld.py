"""Reader and writer for the GFLD field file format.

Layout: the ASCII line ``GFLD 1``, one line of UTF-8 JSON describing the
grid and the fields, then raw little-endian float64 data. Fields are
concatenated in header order; each is row-major over grid points with the
packed components varying fastest. An optional top-level ``"meta"`` object
carries scalar attributes such as ``tau``.
"""
from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .grid import (Grid, GridError, OneForm, ScalarField, SymTensor2, ThreeForm,
                   TwoForm, packed_indices)

__all__ = ["GfldError", "write_gfld", "read_gfld", "atomic_write_bytes", "atomic_write_text"]

MAGIC = b"GFLD 1\n"

_KINDS = {
    (0, "none"): ScalarField,
    (1, "none"): OneForm,
    (2, "sym"): SymTensor2,
    (2, "antisym"): TwoForm,
    (3, "antisym"): ThreeForm,
}


class GfldError(ValueError):
    """Malformed GFLD file."""


def atomic_write_bytes(path, payload: bytes):
    """Write to a temporary sibling and rename it over ``path``."""
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def encode_gfld(grid: Grid, fields: dict, meta: dict | None = None) -> bytes:
    header = {"n": grid.n, "shape": list(grid.shape), "lengths": list(grid.lengths), "fields": []}
    blobs = []
    for name, f in fields.items():
        if f.grid != grid:
            raise GfldError(f"field {name!r} is not on the file grid")
        comps = f.components()
        header["fields"].append({"name": name, "rank": f.rank, "symmetry": f.symmetry,
                                 "components": int(comps.shape[0])})
        blobs.append(np.ascontiguousarray(np.moveaxis(comps, 0, -1), dtype="<f8").tobytes())
    if meta:
        header["meta"] = meta
    line = json.dumps(header, separators=(",", ":")).encode("utf-8")
    return MAGIC + line + b"\n" + b"".join(blobs)


def write_gfld(path, grid: Grid, fields: dict, meta: dict | None = None):
    atomic_write_bytes(path, encode_gfld(grid, fields, meta))


def read_gfld(path):
    """Return ``(grid, fields, meta)`` with fields in file order."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(MAGIC):
        raise GfldError(f"{path}: missing 'GFLD 1' header line")
    end = raw.find(b"\n", len(MAGIC))
    if end < 0:
        raise GfldError(f"{path}: truncated header")
    try:
        header = json.loads(raw[len(MAGIC):end].decode("utf-8"))
        grid = Grid(header["shape"], header["lengths"])
        if int(header["n"]) != grid.n:
            raise GfldError(f"{path}: n does not match shape")
        specs = header["fields"]
    except (KeyError, TypeError, ValueError, GridError) as exc:
        raise GfldError(f"{path}: bad header: {exc}") from exc
    if (len(raw) - end - 1) % 8:
        raise GfldError(f"{path}: data section is not a whole number of float64 values")
    body = np.frombuffer(raw, dtype="<f8", offset=end + 1) if len(raw) > end + 1 else np.zeros(0)
    fields = {}
    pos = 0
    npts = int(np.prod(grid.shape))
    for entry in specs:
        key = (int(entry["rank"]), entry["symmetry"])
        cls = _KINDS.get(key)
        if cls is None:
            raise GfldError(f"{path}: unsupported field kind {key}")
        ncomp = len(packed_indices(cls.rank, cls.symmetry, grid.n))
        if int(entry["components"]) != ncomp:
            raise GfldError(f"{path}: field {entry['name']!r} declares {entry['components']} "
                            f"components, expected {ncomp}")
        size = ncomp * npts
        chunk = body[pos:pos + size]
        if chunk.size != size:
            raise GfldError(f"{path}: data section too short")
        pos += size
        comps = np.moveaxis(chunk.reshape(grid.shape + (ncomp,)), -1, 0)
        fields[entry["name"]] = cls.from_components(grid, comps)
    if pos != body.size:
        raise GfldError(f"{path}: {body.size - pos} trailing values")
    return grid, fields, header.get("meta", {})
