"""String and Einstein frames and the conformal identities relating them.

For an ``(n+1)``-dimensional manifold the Einstein-frame metric is
``g_E = exp(-2 phi / (n - 1)) g``; the b-field is untouched.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .geometry import (Metric, codifferential, hessian, interior, norm2, ricci,
                       scalar_curvature, sharp)
from .grid import Field, ScalarField, TwoForm, exterior_derivative, integrate

__all__ = [
    "FrameError",
    "Frame",
    "FrameTag",
    "to_einstein",
    "to_string",
    "ConformalResiduals",
    "conformal_identity_residuals",
    "default_test_form",
    "einstein_hilbert_densities",
]


class FrameError(ValueError):
    """Invalid frame dimension."""


class Frame(enum.Enum):
    STRING = "string"
    EINSTEIN = "einstein"


@dataclass(frozen=True)
class FrameTag:
    frame: Frame
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise FrameError(f"n must be >= 1, got {self.n}")


def _check(g, phi, n):
    if n < 2:
        raise FrameError(f"the conformal exponent 2/(n-1) needs n >= 2, got n={n}")
    if g.grid.dim != n + 1:
        raise FrameError(f"metric lives on a {g.grid.dim}-dimensional grid, expected n+1={n + 1}")
    if phi.grid != g.grid:
        raise FrameError("metric and dilaton live on different grids")


def to_einstein(g: Metric, phi: ScalarField, n: int) -> Metric:
    """``g_E = exp(-2 phi/(n-1)) g``."""
    _check(g, phi, n)
    return Metric(g.grid, np.exp(-2.0 * phi.data / (n - 1)) * g.data)


def to_string(g_e: Metric, phi: ScalarField, n: int) -> Metric:
    """Inverse of :func:`to_einstein`."""
    _check(g_e, phi, n)
    return Metric(g_e.grid, np.exp(2.0 * phi.data / (n - 1)) * g_e.data)


@dataclass(frozen=True)
class ConformalResiduals:
    """Pointwise max-over-components residuals of the three identities."""

    ricci: ScalarField
    codifferential: ScalarField
    hessian: ScalarField

    def maxima(self):
        return (float(np.max(self.ricci.data)), float(np.max(self.codifferential.data)),
                float(np.max(self.hessian.data)))


def default_test_form(grid) -> TwoForm:
    """Smooth non-closed 2-form used when no test form is supplied."""
    xs = grid.coords()
    data = grid.zeros(2)
    for a in range(grid.dim):
        for b in range(a + 1, grid.dim):
            ka = 2 * np.pi / _period(grid, a)
            kb = 2 * np.pi / _period(grid, b)
            val = np.cos(ka * xs[a] + 0.3 * (a + 1)) * (1.0 + 0.5 * np.sin(kb * xs[b]))
            data[a, b] = val
            data[b, a] = -val
    return TwoForm(grid, data)


def _period(grid, axis):
    return grid.lengths[axis] if hasattr(grid, "lengths") else grid.spacing[axis] * grid.shape[axis]


def _pointwise_max(arr, rank):
    if rank == 0:
        return np.abs(arr)
    return np.max(np.abs(arr).reshape((-1,) + arr.shape[rank:]), axis=0)


def conformal_identity_residuals(g_e: Metric, phi: ScalarField, n: int,
                                 alpha: Field | None = None) -> ConformalResiduals:
    """Residuals of the Ricci, codifferential and Hessian conformal identities.

    Each left side is computed directly from ``g = exp(2 phi/(n-1)) g_E`` and
    each right side is assembled from ``g_E`` quantities:

    * ``Ric^g = Ric_E - (nabla dphi - dphi (x) dphi/(n-1))
      + (delta dphi - |dphi|^2) g_E/(n-1)``
    * ``delta^g a = exp(-2 phi/(n-1)) (delta_E a - (n+1-2k)/(n-1) a(dphi#))``
    * ``nabla^g dphi = nabla^E dphi - 2/(n-1) dphi (x) dphi + |dphi|^2 g_E/(n-1)``
    """
    _check(g_e, phi, n)
    g = to_string(g_e, phi, n)
    if alpha is None:
        alpha = default_test_form(g_e.grid)
    c = 1.0 / (n - 1)
    dphi = exterior_derivative(phi)
    dd = np.einsum("i...,j...->ij...", dphi.data, dphi.data)
    grad2 = norm2(g_e, dphi).data
    hess_e = hessian(g_e, phi).data
    lap_e = codifferential(g_e, dphi).data

    ric_rhs = (ricci(g_e).data - (hess_e - c * dd)
               + c * (lap_e - grad2) * g_e.data)
    r1 = _pointwise_max(ricci(g).data - ric_rhs, 2)

    k = alpha.rank
    contracted = interior(sharp(g_e, dphi), alpha).data
    cod_rhs = np.exp(-2.0 * c * phi.data) * (
        codifferential(g_e, alpha).data - (n + 1 - 2 * k) * c * contracted)
    r2 = _pointwise_max(codifferential(g, alpha).data - cod_rhs, k - 1)

    hes_rhs = hess_e - 2.0 * c * dd + c * grad2 * g_e.data
    r3 = _pointwise_max(hessian(g, phi).data - hes_rhs, 2)

    grid = g_e.grid
    return ConformalResiduals(ScalarField(grid, r1), ScalarField(grid, r2), ScalarField(grid, r3))


def einstein_hilbert_densities(g_e: Metric, phi: ScalarField, n: int):
    """Integrals of ``e^{-phi} nu_g s^g``, ``nu_E s_E`` and ``|dphi|^2_E nu_E``.

    The first equals ``second - n/(n-1) * third`` up to a total divergence,
    so the two curvature densities agree exactly only for constant ``phi``.
    """
    _check(g_e, phi, n)
    g = to_string(g_e, phi, n)
    grid = g_e.grid
    lhs = ScalarField(grid, np.exp(-phi.data) * g.sqrt_det * scalar_curvature(g).data)
    rhs = ScalarField(grid, g_e.sqrt_det * scalar_curvature(g_e).data)
    kin = ScalarField(grid, g_e.sqrt_det * norm2(g_e, exterior_derivative(phi)).data)
    return integrate(lhs), integrate(rhs), integrate(kin)
