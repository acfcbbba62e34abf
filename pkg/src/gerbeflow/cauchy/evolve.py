"""Classical RK4 time stepping of the reduced system."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..grid import NonFiniteError
from ..geometry import DegenerateMetricError
from .state import CauchyState, ConstraintResiduals, EvolutionConfig, constraint_residuals, evolution_rhs

__all__ = ["NumericalAbort", "Trajectory", "rk4_step", "evolve", "fourier_filter"]


class NumericalAbort(FloatingPointError):
    """Evolution produced non-finite values or lost positivity."""

    def __init__(self, step, reason):
        super().__init__(f"evolution aborted at step {step}: {reason}")
        self.step = step


def fourier_filter(arr, grid, modes):
    """Zero every Fourier mode with more than ``modes`` periods along some axis."""
    axes = tuple(range(arr.ndim - grid.n, arr.ndim))
    coeffs = np.fft.fftn(arr, axes=axes)
    for k, ax in enumerate(axes):
        m = np.abs(np.fft.fftfreq(grid.shape[k], 1.0 / grid.shape[k]))
        shape = [1] * arr.ndim
        shape[ax] = grid.shape[k]
        coeffs = coeffs * (m <= modes).reshape(shape)
    return np.fft.ifftn(coeffs, axes=axes).real


def _combine(base, derivs, weight):
    return tuple(b + weight * d for b, d in zip(base, derivs))


def rk4_step(s: CauchyState, cfg: EvolutionConfig) -> CauchyState:
    """One classical Runge-Kutta step of size ``cfg.dt``."""
    dt = cfg.dt
    grid = s.grid
    y0 = s.arrays()

    def stage(arrays, tau):
        return evolution_rhs(CauchyState.from_arrays(grid, arrays, s.flux0, tau), cfg).arrays()

    k1 = evolution_rhs(s, cfg).arrays()
    k2 = stage(_combine(y0, k1, 0.5 * dt), s.tau + 0.5 * dt)
    k3 = stage(_combine(y0, k2, 0.5 * dt), s.tau + 0.5 * dt)
    k4 = stage(_combine(y0, k3, dt), s.tau + dt)
    y1 = tuple(y + (dt / 6.0) * (a + 2.0 * b + 2.0 * c + d)
               for y, a, b, c, d in zip(y0, k1, k2, k3, k4))
    if cfg.filter_modes is not None:
        y1 = tuple(fourier_filter(y, grid, cfg.filter_modes) for y in y1)
    return CauchyState.from_arrays(grid, y1, s.flux0, s.tau + dt)


@dataclass(eq=False)
class Trajectory:
    """Recorded states and constraint norms at a uniform cadence."""

    cfg: EvolutionConfig
    taus: list = field(default_factory=list)
    states: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    final: CauchyState | None = None

    @property
    def record_step(self) -> float:
        return self.cfg.dt * self.cfg.record_every

    def max_constraint(self) -> float:
        return max(r.max_all() for r in self.residuals)

    def rows(self):
        """``(tau, C1_max, C1_l2, C2_max, C2_l2, C3_max, C3_l2)`` per record."""
        keys = ("C1_max", "C1_l2", "C2_max", "C2_l2", "C3_max", "C3_l2")
        return [(t,) + tuple(r.norms[k] for k in keys) for t, r in zip(self.taus, self.residuals)]


class _Norms(ConstraintResiduals):
    """Norm-only record used when constraint fields are not retained."""


def evolve(s: CauchyState, cfg: EvolutionConfig, keep_states: bool = True,
           keep_fields: bool = False, on_record=None) -> Trajectory:
    """Integrate ``cfg.steps`` RK4 steps, recording every ``cfg.record_every`` steps.

    Constraint norms are evaluated at each record. Set ``keep_states=False``
    to drop the states themselves (norms only) for large grids.
    """
    cfg.check_cfl(s.grid)
    traj = Trajectory(cfg)

    def record(state):
        res = constraint_residuals(state, cfg)
        if not keep_fields:
            res = _Norms(None, None, None, res.norms)
        traj.taus.append(state.tau)
        traj.residuals.append(res)
        if keep_states:
            traj.states.append(state)
        if on_record is not None:
            on_record(state, res)

    record(s)
    state = s
    for step in range(1, cfg.steps + 1):
        try:
            state = rk4_step(state, cfg)
        except NonFiniteError as exc:
            raise NumericalAbort(step, str(exc)) from None
        except DegenerateMetricError as exc:
            raise NumericalAbort(step, str(exc)) from None
        if step % cfg.record_every == 0:
            record(state)
    traj.final = state
    return traj
