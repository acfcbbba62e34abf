"""Residuals of the gradient soliton system in the string and Einstein frames.

String frame::

    E  = Ric + 1/2 L_v g - 1/2 H o H
    Mx = delta H + i_v H + alpha

with ``v = grad phi`` and ``alpha = 0`` by default, in which case
``1/2 L_v g`` is the Hessian of ``phi``. Einstein frame (ambient dimension
``n + 1``, ``e = exp(-4 phi/(n-1))``, ``e' = exp(2 phi/(n-1))``)::

    E = Ric - dphi (x) dphi/(n-1) + (e |H|^2 + lam e') g/(n-1) - 1/2 e H o H
    M = delta H + 4/(n-1) H(dphi#)
    D = delta dphi - e |H|^2 - lam e'
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (Metric, circ_form, codifferential, hessian, interior,
                       lie_derivative_metric, norm2, ricci, sharp)
from .grid import (CylinderGrid, Field, GridError, ScalarField, SymTensor2, ThreeForm, TwoForm,
                   VectorField, exterior_derivative)

__all__ = [
    "ClosureError",
    "SolitonFields",
    "truncation_scale",
    "string_residuals",
    "lambda_field",
    "lambda_stats",
    "einstein_residuals",
    "interior_max",
    "AffineMap",
    "pullback_field",
    "pullback_affine",
]


class ClosureError(ValueError):
    """A form that must be closed is not, beyond discretization error."""


def truncation_scale(f: Field) -> float:
    """Leading finite-difference truncation estimate ``max_a h_a^4 |d_a^5 f| / 30``.

    The fifth derivative is itself estimated with the grid stencil, so the
    figure is data driven. A roundoff floor proportional to ``|f|/h`` is added.
    """
    grid = f.grid
    scale = 0.0
    floor = 0.0
    amp = f.max_abs()
    for a in range(grid.dim):
        d5 = f.data
        for _ in range(5):
            d5 = grid.diff(d5, a)
        scale = max(scale, grid.spacing[a] ** 4 * float(np.max(np.abs(d5))) / 30.0)
        floor = max(floor, 1e-13 * amp / grid.spacing[a])
    return scale + floor


def _check_closed(form: Field, label: str):
    if form.rank >= form.grid.dim:
        return
    dform = exterior_derivative(form)
    bound = 100.0 * form.rank * truncation_scale(form) + 1e-300
    err = dform.max_abs()
    if err > bound:
        raise ClosureError(f"d{label} = {err:.3e} exceeds 100x the expected truncation ({bound / 100:.3e})")


@dataclass(frozen=True, eq=False)
class SolitonFields:
    """Configuration ``(g, H, phi)`` with optional soliton vector ``v`` and closed ``alpha``."""

    g: Metric
    H: ThreeForm | None
    phi: ScalarField
    v: VectorField | None = None
    alpha: TwoForm | None = None

    def __post_init__(self):
        grid = self.g.grid
        if not isinstance(self.g, Metric):
            raise TypeError("g must be a Metric")
        for name in ("H", "phi", "v", "alpha"):
            f = getattr(self, name)
            if f is not None and f.grid != grid:
                raise GridError(f"{name} lives on a different grid from g")
        if self.H is not None:
            if not isinstance(self.H, ThreeForm):
                raise TypeError("H must be a ThreeForm")
            if grid.dim < 3 and self.H.max_abs() > 0:
                raise GridError("a nonzero flux needs ambient dimension >= 3")
            _check_closed(self.H, "H")
        if self.alpha is not None:
            _check_closed(self.alpha, "alpha")

    @property
    def grid(self):
        return self.g.grid

    @property
    def flux(self) -> ThreeForm:
        return self.H if self.H is not None else ThreeForm.zeros(self.grid)

    @property
    def gradient(self) -> bool:
        return self.v is None


def string_residuals(s: SolitonFields):
    """Einstein and Maxwell residuals ``(E, Mx)`` in the string frame."""
    g, H = s.g, s.flux
    if s.v is None:
        half_lie = hessian(g, s.phi).data
        v = sharp(g, exterior_derivative(s.phi))
    else:
        v = s.v
        half_lie = 0.5 * lie_derivative_metric(g, v).data
    e = ricci(g).data + half_lie - 0.5 * circ_form(g, H, H).data
    mx = codifferential(g, H).data + interior(v, H).data
    if s.alpha is not None:
        mx = mx + s.alpha.data
    return SymTensor2(g.grid, e), TwoForm(g.grid, mx)


def lambda_field(s: SolitonFields) -> ScalarField:
    """``lam = delta dphi + |dphi|^2 - |H|^2`` (determinant norm), gradient case."""
    if not s.gradient:
        raise ValueError("lambda_field is defined for the gradient case only")
    g = s.g
    dphi = exterior_derivative(s.phi)
    lam = codifferential(g, dphi).data + norm2(g, dphi).data - norm2(g, s.flux).data
    return ScalarField(g.grid, lam)


def _interior_view(arr, grid, margin=4):
    if isinstance(grid, CylinderGrid):
        return arr[(Ellipsis, grid.interior(margin)) + (slice(None),) * grid.n]
    return arr


def interior_max(f: Field, margin: int = 4) -> float:
    """Max norm, restricted to interior tau slices on a cylinder."""
    return float(np.max(np.abs(_interior_view(f.data, f.grid, margin)), initial=0.0))


def lambda_stats(s: SolitonFields, margin: int = 4):
    """``(mean, max deviation from mean, standard deviation)`` over interior points."""
    vals = _interior_view(lambda_field(s).data, s.grid, margin)
    mean = float(np.mean(vals))
    return mean, float(np.max(np.abs(vals - mean))), float(np.std(vals))


def einstein_residuals(s: SolitonFields, lam: float, n: int):
    """Residuals ``(E, M, D)`` of the Einstein-frame system; ``s.g`` is ``g_E``."""
    g, H, phi = s.g, s.flux, s.phi
    if g.grid.dim != n + 1:
        raise GridError(f"ambient dimension {g.grid.dim} does not equal n+1={n + 1}")
    if n < 2:
        raise GridError("the Einstein frame needs n >= 2")
    c = 1.0 / (n - 1)
    e = np.exp(-4.0 * c * phi.data)
    ep = np.exp(2.0 * c * phi.data)
    dphi = exterior_derivative(phi)
    h2 = norm2(g, H).data
    dd = np.einsum("i...,j...->ij...", dphi.data, dphi.data)
    big_e = (ricci(g).data - c * dd + c * (e * h2 + lam * ep) * g.data
             - 0.5 * e * circ_form(g, H, H).data)
    m = codifferential(g, H).data + 4.0 * c * interior(sharp(g, dphi), H).data
    d = codifferential(g, dphi).data - e * h2 - lam * ep
    grid = g.grid
    return SymTensor2(grid, big_e), TwoForm(grid, m), ScalarField(grid, d)


# ---------------------------------------------------------------------------
# affine torus maps


class AffineMap:
    """Torus map ``x -> A x + b`` with ``A`` a signed permutation matrix.

    ``A`` acts on the spatial axes; on a cylinder the tau axis is fixed.
    Only signed permutations commute exactly with axis-aligned stencils,
    so other integer matrices (shears) are rejected as not grid compatible.
    ``shift`` is the physical translation ``b``.
    """

    def __init__(self, matrix, shift=None):
        a = np.asarray(matrix)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GridError("map matrix must be square")
        if not np.array_equal(a, np.round(a)):
            raise GridError("map matrix must have integer entries")
        a = a.astype(int)
        if not (np.all(np.sum(np.abs(a), axis=0) == 1) and np.all(np.sum(np.abs(a), axis=1) == 1)):
            raise GridError("only signed permutation matrices are grid compatible")
        self.matrix = a
        self.shift = np.zeros(a.shape[0]) if shift is None else np.asarray(shift, dtype=float)
        if self.shift.shape != (a.shape[0],):
            raise GridError("shift must have one entry per axis")

    def _resolve(self, grid):
        space = grid.space if isinstance(grid, CylinderGrid) else grid
        n = space.n
        if self.matrix.shape[0] != n:
            raise GridError(f"map acts on {self.matrix.shape[0]} axes, grid has {n}")
        perm = [int(np.flatnonzero(self.matrix[:, k])[0]) for k in range(n)]  # axis k -> perm[k]
        sign = [int(self.matrix[perm[k], k]) for k in range(n)]
        for k in range(n):
            if (space.shape[k] != space.shape[perm[k]]
                    or space.lengths[k] != space.lengths[perm[k]]):
                raise GridError(f"map sends axis {k} to an axis with different length or size")
        steps = []
        for m in range(n):
            q = self.shift[m] / space.spacing[m]
            if abs(q - round(q)) > 1e-9:
                raise GridError(f"translation {self.shift[m]} is not a multiple of the spacing")
            steps.append(int(round(q)))
        return space, perm, sign, steps


def pullback_field(fmap: AffineMap, f: Field) -> Field:
    """Pull a tensor field back along ``fmap``: resample then transform indices."""
    grid = f.grid
    space, perm, sign, steps = fmap._resolve(grid)
    n = space.n
    off = 1 if isinstance(grid, CylinderGrid) else 0
    # resample: value at i is the value at f(i)
    index = [None] * n
    for k in range(n):
        m = perm[k]
        shape = [1] * n
        shape[k] = space.shape[k]
        idx = (sign[k] * np.arange(space.shape[k]) + steps[m]) % space.shape[m]
        index[m] = idx.reshape(shape)
    lead = (slice(None),) * (f.rank + off)
    data = f.data[lead + tuple(index)]
    # Jacobian J[a, i] = d f^a / d x^i over all axes
    dim = grid.dim
    jac = np.zeros((dim, dim))
    if off:
        jac[0, 0] = 1.0
    for k in range(n):
        jac[perm[k] + off, k + off] = sign[k]
    mat = np.linalg.inv(jac) if isinstance(f, VectorField) else jac.T
    for slot in range(f.rank):
        data = np.moveaxis(np.tensordot(mat, data, axes=([1], [slot])), 0, slot)
    return f.like(data)


def pullback_affine(fmap: AffineMap, s: SolitonFields) -> SolitonFields:
    def pb(f):
        return None if f is None else pullback_field(fmap, f)

    return SolitonFields(Metric(s.grid, pullback_field(fmap, s.g).data), pb(s.H), pb(s.phi),
                         pb(s.v), pb(s.alpha))
