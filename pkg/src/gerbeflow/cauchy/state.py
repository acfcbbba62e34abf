"""Reduced Cauchy data, evolution right-hand sides and constraints.

With ``c = 1/(n-1)``, ``e = exp(-4 c phi)``, ``e' = exp(2 c phi)``,
``H = flux0 + d theta`` and ``tr = Tr_h K`` the evolution system is::

    d_tau h     = K
    d_tau K     = 2 Ric + K o K - tr K/2 - 2c dphi (x) dphi
                  + 2c (e (|psi|^2 + |H|^2) + lam e') h - e (psi o psi + H o H)
    d_tau phi   = rho
    d_tau rho   = delta dphi - rho tr/2 - e (|psi|^2 + |H|^2) - lam e'
    d_tau psi   = delta H + 4c H(dphi#) + K Delta1 psi + (4c rho - tr/2) psi
    d_tau theta = psi

and the constraints are::

    C1 = delta K + d tr + 2c rho dphi + e psi _| H
    C2 = s + |K|^2/4 - tr^2/4 + lam e' + c (rho^2 - |dphi|^2) + e (|psi|^2 - |H|^2)/2
    C3 = delta psi + 4c psi(dphi#)

``|K|^2 = K_ij K^ij`` is the tensor norm; form norms are determinant norms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..geometry import (Metric, circ_form, circ_sym, codifferential, delta1, div_symtensor,
                        form_contract, interior, norm2, scalar_curvature, sharp, sym_norm2,
                        trace)
from ..geometry import ricci as _ricci
from ..grid import (Grid, GridError, OneForm, ScalarField, SymTensor2, ThreeForm, TwoForm,
                    exterior_derivative, integrate)
from ..soliton import _check_closed

__all__ = [
    "CauchyState",
    "EvolutionConfig",
    "ConstraintResiduals",
    "Derivatives",
    "evolution_rhs",
    "constraint_residuals",
    "flux_of",
]

FIELDS = ("h", "K", "phi", "rho", "psi", "theta")


@dataclass(frozen=True, eq=False)
class CauchyState:
    """Unknowns of the reduced system on a periodic grid, at time ``tau``."""

    h: Metric
    K: SymTensor2
    phi: ScalarField
    rho: ScalarField
    psi: TwoForm
    theta: TwoForm
    flux0: ThreeForm | None = None
    tau: float = 0.0

    def __post_init__(self):
        if not isinstance(self.h, Metric):
            raise TypeError("h must be a Metric")
        grid = self.h.grid
        if not isinstance(grid, Grid):
            raise GridError("Cauchy data lives on a periodic Grid")
        if grid.n < 2:
            raise GridError("the reduced system needs n >= 2")
        kinds = {"K": SymTensor2, "phi": ScalarField, "rho": ScalarField, "psi": TwoForm,
                 "theta": TwoForm}
        for name, cls in kinds.items():
            f = getattr(self, name)
            if type(f) is not cls:
                raise TypeError(f"{name} must be a {cls.__name__}")
            if f.grid != grid:
                raise GridError(f"{name} lives on a different grid from h")
        if self.flux0 is not None:
            if self.flux0.grid != grid:
                raise GridError("flux0 lives on a different grid from h")
            _check_closed(self.flux0, "flux0")

    @property
    def grid(self) -> Grid:
        return self.h.grid

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def H(self) -> ThreeForm:
        """``flux0 + d theta`` (identically zero when n < 3)."""
        return flux_of(self.grid, self.flux0, self.theta)

    def arrays(self):
        return tuple(getattr(self, k).data for k in FIELDS)

    @classmethod
    def from_arrays(cls, grid, arrays, flux0=None, tau=0.0):
        h, K, phi, rho, psi, theta = arrays
        return cls(Metric(grid, h), SymTensor2(grid, K), ScalarField(grid, phi),
                   ScalarField(grid, rho), TwoForm(grid, psi), TwoForm(grid, theta), flux0, tau)

    @classmethod
    def flat(cls, grid, flux0=None):
        """Stationary flat point: ``h = delta`` and all other fields zero."""
        return cls(Metric.euclidean(grid), SymTensor2.zeros(grid), ScalarField.zeros(grid),
                   ScalarField.zeros(grid), TwoForm.zeros(grid), TwoForm.zeros(grid), flux0)

    def replace(self, **kw):
        vals = {k: getattr(self, k) for k in FIELDS + ("flux0", "tau")}
        vals.update(kw)
        return CauchyState(**vals)

    def max_difference(self, other) -> float:
        return max(float(np.max(np.abs(a - b))) for a, b in zip(self.arrays(), other.arrays()))


def flux_of(grid, flux0, theta):
    if grid.n < 3:
        return ThreeForm.zeros(grid)
    dtheta = exterior_derivative(theta)
    return dtheta if flux0 is None else flux0 + dtheta


@dataclass(frozen=True)
class EvolutionConfig:
    """Time-stepping parameters; the gauge ``a_tau = 0`` is fixed.

    ``dt`` must satisfy ``dt <= 0.25 * min spacing`` (a stability heuristic).
    ``filter_modes`` optionally removes Fourier modes with ``|m| > filter_modes``
    on every axis after each step (``m`` counts periods across the torus).
    """

    lam: float = 0.0
    dt: float = 0.01
    steps: int = 1
    record_every: int = 1
    filter_modes: int | None = None

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.steps < 0 or self.record_every < 1:
            raise ValueError("steps must be >= 0 and record_every >= 1")
        if not math.isfinite(self.lam):
            raise ValueError("lam must be finite")
        if self.filter_modes is not None and self.filter_modes < 1:
            raise ValueError("filter_modes must be a positive integer")

    def check_cfl(self, grid):
        bound = 0.25 * min(grid.spacing)
        if self.dt > bound * (1 + 1e-12):
            raise ValueError(f"dt={self.dt} exceeds 0.25 * min spacing = {bound}")

    @classmethod
    def for_span(cls, grid, tau_end, lam=0.0, courant=0.25, **kw):
        """Largest step ``<= courant * min spacing`` dividing ``tau_end`` evenly."""
        steps = max(1, math.ceil(tau_end / (courant * min(grid.spacing)) - 1e-9))
        return cls(lam=lam, dt=tau_end / steps, steps=steps, **kw)


@dataclass(frozen=True, eq=False)
class Derivatives:
    """Time derivatives of every evolved field."""

    h: np.ndarray
    K: np.ndarray
    phi: np.ndarray
    rho: np.ndarray
    psi: np.ndarray
    theta: np.ndarray

    def arrays(self):
        return tuple(getattr(self, k) for k in FIELDS)


def _expo(n, phi):
    c = 1.0 / (n - 1)
    return c, np.exp(-4.0 * c * phi.data), np.exp(2.0 * c * phi.data)


def evolution_rhs(s: CauchyState, cfg: EvolutionConfig) -> Derivatives:
    """Right-hand side of the first-order reduced system."""
    h, K, phi, rho, psi = s.h, s.K, s.phi, s.rho, s.psi
    lam = cfg.lam
    c, e, ep = _expo(s.n, phi)
    dphi = exterior_derivative(phi)
    trk = trace(h, K).data
    psi2 = norm2(h, psi).data
    has_h = s.n >= 3
    if has_h:
        H = s.H
        h2 = norm2(h, H).data
        hh = circ_form(h, H, H).data
    else:
        h2 = 0.0
        hh = 0.0
    forms2 = psi2 + h2

    dk = (2.0 * _ricci(h).data + circ_sym(h, K, K).data - 0.5 * trk * K.data
          - 2.0 * c * np.einsum("i...,j...->ij...", dphi.data, dphi.data)
          + 2.0 * c * (e * forms2 + lam * ep) * h.data
          - e * (circ_form(h, psi, psi).data + hh))
    drho = codifferential(h, dphi).data - 0.5 * rho.data * trk - e * forms2 - lam * ep
    dpsi = delta1(h, K, psi).data + (4.0 * c * rho.data - 0.5 * trk) * psi.data
    if has_h:
        dpsi = dpsi + codifferential(h, H).data + 4.0 * c * interior(sharp(h, dphi), H).data
    return Derivatives(K.data, dk, rho.data, drho, dpsi, psi.data)


@dataclass(frozen=True, eq=False)
class ConstraintResiduals:
    """Constraint fields with their max and L2 norms."""

    C1: OneForm
    C2: ScalarField
    C3: OneForm
    norms: dict = field(default_factory=dict)

    @classmethod
    def build(cls, c1, c2, c3):
        norms = {}
        for name, f in (("C1", c1), ("C2", c2), ("C3", c3)):
            sq = f.data ** 2
            if f.rank:
                sq = np.sum(sq.reshape((-1,) + f.grid.shape), axis=0)
            norms[f"{name}_max"] = f.max_abs()
            norms[f"{name}_l2"] = math.sqrt(integrate(ScalarField(f.grid, sq)))
        return cls(c1, c2, c3, norms)

    def max_all(self) -> float:
        return max(self.norms["C1_max"], self.norms["C2_max"], self.norms["C3_max"])


def constraint_residuals(s: CauchyState, cfg: EvolutionConfig) -> ConstraintResiduals:
    """Evaluate the momentum, Hamiltonian and flux constraints."""
    h, K, phi, rho, psi = s.h, s.K, s.phi, s.rho, s.psi
    grid = s.grid
    lam = cfg.lam
    c, e, ep = _expo(s.n, phi)
    dphi = exterior_derivative(phi)
    trk = trace(h, K)
    psi2 = norm2(h, psi).data
    c1 = (div_symtensor(h, K).data + exterior_derivative(trk).data
          + 2.0 * c * rho.data * dphi.data)
    h2 = 0.0
    if s.n >= 3:
        H = s.H
        h2 = norm2(h, H).data
        c1 = c1 + e * form_contract(h, psi, H).data
    c2 = (scalar_curvature(h).data + 0.25 * sym_norm2(h, K).data - 0.25 * trk.data ** 2
          + lam * ep + c * (rho.data ** 2 - norm2(h, dphi).data) + 0.5 * e * (psi2 - h2))
    c3 = codifferential(h, psi).data + 4.0 * c * interior(sharp(h, dphi), psi).data
    return ConstraintResiduals.build(OneForm(grid, c1), ScalarField(grid, c2), OneForm(grid, c3))
