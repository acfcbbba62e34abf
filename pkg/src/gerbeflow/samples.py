"""Smooth seeded test data on periodic grids.

Every sample is a finite trigonometric sum, hence analytic, and is fully
determined by the generator passed in.
"""
from __future__ import annotations

import numpy as np

from .geometry import Metric
from .grid import Grid, ScalarField, SymTensor2, form_class, packed_indices

__all__ = ["trig_sum", "analytic_scalar", "analytic_metric", "analytic_symtensor", "analytic_form",
           "linear_dilaton"]


def trig_sum(grid: Grid, rng, modes: int = 1, terms: int = 3):
    """Random ``sum_j a_j cos(2 pi k_j . x / L + phase_j)`` with ``|k_j| <= modes`` per axis."""
    xs = grid.coords()
    out = np.zeros(grid.shape)
    for _ in range(terms):
        ks = rng.integers(-modes, modes + 1, size=grid.n)
        arg = sum(2 * np.pi * k * x / L for k, x, L in zip(ks, xs, grid.lengths))
        out += rng.normal() * np.cos(arg + rng.uniform(0, 2 * np.pi))
    return out


def analytic_scalar(grid: Grid, rng, amplitude: float = 0.2, modes: int = 1) -> ScalarField:
    return ScalarField(grid, amplitude * trig_sum(grid, rng, modes))


def analytic_symtensor(grid: Grid, rng, amplitude: float = 0.2, modes: int = 1) -> SymTensor2:
    d = grid.dim
    data = np.zeros((d, d) + grid.shape)
    for i in range(d):
        for j in range(i, d):
            data[i, j] = data[j, i] = amplitude * trig_sum(grid, rng, modes)
    return SymTensor2(grid, data)


def analytic_metric(grid: Grid, rng, amplitude: float = 0.1, modes: int = 1) -> Metric:
    """``delta + amplitude * smooth``, rescaled when needed to stay positive definite."""
    pert = analytic_symtensor(grid, rng, 1.0, modes).data
    worst = float(np.max(np.abs(pert)))
    scale = amplitude if amplitude * worst * grid.dim < 0.5 else 0.5 / (worst * grid.dim)
    return Metric(grid, np.eye(grid.dim).reshape((grid.dim, grid.dim) + (1,) * grid.n) + scale * pert)


def analytic_form(grid: Grid, k: int, rng, amplitude: float = 1.0, modes: int = 1):
    """Generic (not closed) smooth ``k``-form."""
    cls = form_class(k)
    ncomp = len(packed_indices(k, cls.symmetry, grid.dim))
    comps = np.stack([amplitude * trig_sum(grid, rng, modes) for _ in range(ncomp)]) if ncomp else \
        np.zeros((0,) + grid.shape)
    return cls.from_components(grid, comps)


def linear_dilaton(grid: Grid, q: float, axis: int = 0) -> ScalarField:
    """``phi = q x_axis``; only meaningful on an open (non-periodic) axis."""
    return ScalarField(grid, q * grid.coords()[axis])
