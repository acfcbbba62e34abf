"""Cauchy states as GFLD files."""
from __future__ import annotations

from ..geometry import Metric
from ..gfld import GfldError, read_gfld, write_gfld
from .state import FIELDS, CauchyState

__all__ = ["write_state", "read_state"]


def write_state(path, s: CauchyState, meta: dict | None = None):
    """Write every evolved field, plus ``flux0`` when present; ``tau`` goes in the metadata."""
    fields = {name: getattr(s, name) for name in FIELDS}
    if s.flux0 is not None:
        fields["flux0"] = s.flux0
    write_gfld(path, s.grid, fields, {"tau": s.tau, **(meta or {})})


def read_state(path) -> CauchyState:
    grid, fields, meta = read_gfld(path)
    missing = [name for name in FIELDS if name not in fields]
    if missing:
        raise GfldError(f"{path}: not a Cauchy state, missing fields {missing}")
    try:
        vals = {name: fields[name] for name in FIELDS}
        vals["h"] = Metric(grid, vals["h"].data)
        return CauchyState(**vals, flux0=fields.get("flux0"), tau=float(meta.get("tau", 0.0)))
    except TypeError as exc:
        raise GfldError(f"{path}: field of the wrong kind: {exc}") from None
