"""Flux-level bookkeeping for gerbe data on a flat 3-torus.

A gerbe is modelled by its Dixmier-Douady integer ``m`` together with a
curving modulo closed 2-forms with periods in ``2 pi Z``. The curvature is
``H = H0 + d theta`` with harmonic part ``H0 = (2 pi m / vol) dx ^ dy ^ dz``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .grid import (Grid, GridError, ThreeForm, TwoForm, _diff_open,
                   exterior_derivative, fundamental_period)
from .soliton import truncation_scale

__all__ = [
    "GaugeError",
    "FluxData",
    "CurvingRep",
    "flux_representative",
    "quantization_check",
    "gauge_act",
    "plaquette_periods",
    "exact_primitive",
    "same_class",
    "reduction_closure_check",
]

TWO_PI = 2.0 * math.pi


class GaugeError(ValueError):
    """Gauge parameter is not closed or not integral."""


def flux_representative(m: int, grid: Grid) -> ThreeForm:
    """Constant 3-form with period ``2 pi m`` over the torus."""
    if int(m) != m:
        raise GridError(f"flux class must be an integer, got {m}")
    m = int(m)
    if grid.n != 3:
        if m != 0:
            raise GridError(f"a nonzero flux class needs n = 3, got n = {grid.n}")
        return ThreeForm.zeros(grid)
    comp = np.full(grid.shape, TWO_PI * m / grid.volume)
    return ThreeForm.from_components(grid, comp[None])


@dataclass(frozen=True, eq=False)
class FluxData:
    m: int
    grid: Grid

    @property
    def H0(self) -> ThreeForm:
        return flux_representative(self.m, self.grid)

    @property
    def vol(self) -> float:
        return self.grid.volume


def quantization_check(H: ThreeForm):
    """``(round(period / 2 pi), |period - 2 pi round|)`` over the whole torus."""
    grid = H.grid
    if not isinstance(grid, Grid) or grid.n != 3:
        raise GridError("quantization is checked on the 3-torus")
    if not isinstance(H, ThreeForm):
        raise TypeError("H must be a ThreeForm")
    period = fundamental_period(H, (0, 1, 2))
    m = round(period / TWO_PI)
    return int(m), abs(period - TWO_PI * m)


def plaquette_periods(sigma: TwoForm) -> dict:
    """Periods of ``sigma`` over each coordinate 2-torus through the origin."""
    return {pair: fundamental_period(sigma, pair)
            for pair in itertools.combinations(range(sigma.grid.dim), 2)}


@dataclass(frozen=True, eq=False)
class CurvingRep:
    """Global 2-form part ``theta`` of a curving over fixed flux data."""

    theta: TwoForm
    flux: FluxData

    def __post_init__(self):
        if self.theta.grid != self.flux.grid:
            raise GridError("theta and the flux data live on different grids")

    @property
    def H(self) -> ThreeForm:
        H0 = self.flux.H0
        if self.flux.grid.n < 3:
            return H0
        return H0 + exterior_derivative(self.theta)


def gauge_act(c: CurvingRep, sigma: TwoForm, tol: float = 1e-8) -> CurvingRep:
    """Shift the curving by a closed 2-form with periods in ``2 pi Z``."""
    if sigma.grid != c.theta.grid:
        raise GridError("sigma lives on a different grid")
    if sigma.grid.dim > 2:
        err = exterior_derivative(sigma).max_abs()
        bound = 100.0 * 2 * truncation_scale(sigma)
        if err > bound:
            raise GaugeError(f"sigma is not closed: |d sigma| = {err:.3e}")
    for pair, p in plaquette_periods(sigma).items():
        if abs(p - TWO_PI * round(p / TWO_PI)) > tol:
            raise GaugeError(f"period of sigma over axes {pair} is {p!r}, not in 2 pi Z")
    return CurvingRep(c.theta + sigma, c.flux)


def _symbol(grid):
    """Fourier symbols of the first-derivative stencil, one per axis."""
    out = []
    for a in range(grid.n):
        th = 2 * np.pi * np.fft.fftfreq(grid.shape[a])
        sym = (8.0 * np.sin(th) - np.sin(2.0 * th)) / (6.0 * grid.spacing[a])
        shape = [1] * grid.n
        shape[a] = grid.shape[a]
        out.append(sym.reshape(shape))
    return out


def exact_primitive(top: ThreeForm) -> TwoForm:
    """A 2-form ``beta`` with ``d beta = top`` for a zero-period 3-form on T^3.

    Solves ``sum_a D_a D_a u = f`` spectrally for the discrete stencil ``D``
    and returns ``beta = i_{grad u} vol``, so ``d beta`` reproduces ``top`` to
    roundoff whenever ``top`` lies in the range of the discrete ``d``.
    """
    grid = top.grid
    if not isinstance(grid, Grid) or grid.n != 3:
        raise GridError("exact_primitive works on the 3-torus")
    f = top.data[0, 1, 2]
    sym = _symbol(grid)
    lap = -sum(s ** 2 for s in sym)
    fh = np.fft.fftn(f)
    safe = np.where(np.abs(lap) > 1e-12 * np.max(np.abs(lap)), lap, np.inf)
    uh = fh / safe
    grads = [np.fft.ifftn(1j * s * uh).real for s in sym]
    beta = np.zeros((3, 3) + grid.shape)
    for a, (i, j) in enumerate(((1, 2), (2, 0), (0, 1))):
        beta[i, j] = grads[a]
        beta[j, i] = -grads[a]
    return TwoForm(grid, beta)


def same_class(c1: CurvingRep, c2: CurvingRep, tol: float = 1e-8) -> bool:
    """True when the curvature difference is exact (equal Dixmier-Douady class)."""
    diff = c1.H - c2.H
    if abs(fundamental_period(diff, (0, 1, 2))) > tol:
        return False
    beta = exact_primitive(diff)
    return float(np.max(np.abs(exterior_derivative(beta).data - diff.data))) <= tol


def _tau_derivative(samples, step):
    stack = np.stack(samples, axis=0)
    return _diff_open(stack, 0, step)


def reduction_closure_check(H_samples, psi_samples, step: float, A_samples=None,
                            Psi_samples=None) -> dict:
    """Residuals of ``d_tau H = d psi``, ``d H = 0`` and optionally ``d_tau A = d Psi``.

    Samples are uniformly spaced in tau with spacing ``step``; the tau
    derivative uses the same 4th-order stencils as the cylinder grid.
    """
    if len(H_samples) < 5 or len(H_samples) != len(psi_samples):
        raise ValueError("need at least 5 matching tau samples of H and psi")
    grid = H_samples[0].grid
    dH_dtau = _tau_derivative([f.data for f in H_samples], step)
    if grid.dim > 2:
        dpsi = np.stack([exterior_derivative(p).data for p in psi_samples])
    else:
        dpsi = np.zeros_like(dH_dtau)
    out = {"dtau_H_minus_dpsi": float(np.max(np.abs(dH_dtau - dpsi), initial=0.0))}
    if grid.dim > 3:
        out["dH"] = max(exterior_derivative(f).max_abs() for f in H_samples)
    else:
        out["dH"] = 0.0
    if A_samples is not None:
        if Psi_samples is None or len(A_samples) != len(Psi_samples) or len(A_samples) < 5:
            raise ValueError("need at least 5 matching tau samples of A and Psi")
        dA = _tau_derivative([f.data for f in A_samples], step)
        dPsi = np.stack([exterior_derivative(p).data for p in Psi_samples])
        out["dtau_A_minus_dPsi"] = float(np.max(np.abs(dA - dPsi)))
    return out
