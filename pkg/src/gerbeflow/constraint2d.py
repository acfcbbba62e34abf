"""Initial data on a flat 2-torus from the conformal ansatz.

On ``Sigma = T^2`` the flux constraint is solved by ``psi = c e^{4 phi} nu_h``
and the momentum constraint by ``Theta = f h`` with ``f = (int F)(phi) + k``
and ``rho = -F(phi)``, where ``K = 2 Theta``. Writing ``h = e^u h0`` turns the
Hamiltonian constraint (``lam = 0``) into::

    delta_0 du + A e^u - B e^{-u} - w = 0,
    A = F(phi)^2 + (c^2/2) e^{4 phi} - 2 (k + (int F)(phi))^2,
    B = 0,   w = |dphi|^2_{h0} - s_{h0},

which is solved by Newton's method with a Krylov inner solve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg, gmres

from .cauchy.state import CauchyState, EvolutionConfig, constraint_residuals
from .geometry import Metric, codifferential, norm2, scalar_curvature, sym_norm2, trace
from .grid import ScalarField, SymTensor2, TwoForm, exterior_derivative, integrate

__all__ = [
    "HypothesisError",
    "NewtonError",
    "AnsatzFunction",
    "ANSATZ_FUNCTIONS",
    "AnsatzParams",
    "psi_from_phi",
    "build_momentum_ansatz",
    "NewtonResult",
    "solve_conformal_factor",
    "elliptic_coefficients",
    "ConstraintSolution",
    "solve_conformal_constraints",
]


class HypothesisError(ValueError):
    """A solvability hypothesis of the elliptic equation fails."""

    def __init__(self, hypothesis, detail):
        super().__init__(f"hypothesis '{hypothesis}' violated: {detail}")
        self.hypothesis = hypothesis


class NewtonError(RuntimeError):
    """Newton iteration did not converge; ``history`` holds the residuals."""

    def __init__(self, msg, history):
        super().__init__(msg)
        self.history = history


@dataclass(frozen=True)
class AnsatzFunction:
    """A function ``F`` of one variable together with an antiderivative."""

    name: str
    F: object
    integral: object


ANSATZ_FUNCTIONS = {
    "zero": AnsatzFunction("zero", lambda t: np.zeros_like(t), lambda t: np.zeros_like(t)),
    "const1": AnsatzFunction("const1", lambda t: np.ones_like(t), lambda t: np.asarray(t, float)),
    "linear": AnsatzFunction("linear", lambda t: np.asarray(t, float), lambda t: 0.5 * np.asarray(t, float) ** 2),
}


@dataclass(frozen=True, eq=False)
class AnsatzParams:
    c: float
    k: float
    F: AnsatzFunction
    phi: ScalarField
    theta_o: SymTensor2 | None = None

    def __post_init__(self):
        if isinstance(self.F, str):
            try:
                object.__setattr__(self, "F", ANSATZ_FUNCTIONS[self.F])
            except KeyError:
                raise ValueError(f"unknown F {self.F!r}; choose from {sorted(ANSATZ_FUNCTIONS)}") from None

    def f(self):
        return self.F.integral(self.phi.data) + self.k


def _require_2d(grid):
    if grid.dim != 2:
        raise ValueError(f"the ansatz is specific to n = 2, got n = {grid.dim}")


def psi_from_phi(c: float, phi: ScalarField, h: Metric) -> TwoForm:
    """``psi = c e^{4 phi} sqrt(det h) dx ^ dy``."""
    _require_2d(h.grid)
    val = c * np.exp(4.0 * phi.data) * h.sqrt_det
    data = np.zeros((2, 2) + h.grid.shape)
    data[0, 1] = val
    data[1, 0] = -val
    return TwoForm(h.grid, data)


def build_momentum_ansatz(p: AnsatzParams, h: Metric):
    """``(Theta, rho) = (f h + Theta_o, -F(phi))``."""
    _require_2d(h.grid)
    theta = p.f() * h.data
    if p.theta_o is not None:
        tr = trace(h, p.theta_o).max_abs()
        if tr > 1e-12:
            raise HypothesisError("Theta_o traceless", f"max |Tr Theta_o| = {tr:.3e}")
        theta = theta + p.theta_o.data
    return SymTensor2(h.grid, theta), ScalarField(h.grid, -p.F.F(p.phi.data))


@dataclass
class NewtonResult:
    u: ScalarField
    history: list = field(default_factory=list)
    iterations: int = 0
    linear_iterations: list = field(default_factory=list)

    @property
    def final_residual(self) -> float:
        return self.history[-1]


def _is_constant_diagonal(h: Metric) -> bool:
    d = h.data
    ref = d.reshape(d.shape[:2] + (-1,))[..., :1]
    const = np.all(d.reshape(d.shape[:2] + (-1,)) == ref)
    off = all(np.all(ref[i, j] == 0) for i in range(d.shape[0]) for j in range(d.shape[1]) if i != j)
    return bool(const and off)


def solve_conformal_factor(h: Metric, A: ScalarField, B: ScalarField, w: ScalarField, u0=None,
                  tol: float = 1e-10, maxiter: int = 50) -> NewtonResult:
    """Newton-Krylov solve of ``delta du + A e^u - B e^{-u} - w = 0``.

    Hypotheses checked: ``A, B >= 0`` pointwise, ``int (A - B) > 0`` and
    ``int w > 0``. The initial guess defaults to
    ``log(max(int w / int A, 1e-6))``. The linearization
    ``delta d + A e^u + B e^{-u}`` is symmetric positive definite on a
    constant-coefficient metric, where conjugate gradients are used; GMRES
    is used otherwise.
    """
    grid = h.grid
    vol = h.sqrt_det

    def measure(f):
        return integrate(ScalarField(grid, f * vol))

    if np.min(A.data) < 0:
        raise HypothesisError("A >= 0", f"min A = {np.min(A.data):.3e}")
    if np.min(B.data) < 0:
        raise HypothesisError("B >= 0", f"min B = {np.min(B.data):.3e}")
    int_ab = measure(A.data - B.data)
    if not int_ab > 0:
        raise HypothesisError("int (A - B) > 0", f"int (A - B) = {int_ab:.3e}")
    int_w = measure(w.data)
    if not int_w > 1e-12 * grid.cell_volume * max(1.0, float(np.max(np.abs(w.data)))):
        raise HypothesisError("int w > 0", f"int w = {int_w:.3e}")

    if u0 is None:
        u0 = math.log(max(int_w / measure(A.data), 1e-6))
    u = np.broadcast_to(np.asarray(u0, dtype=float), grid.shape).copy()
    a, b, wv = A.data, B.data, w.data
    symmetric = _is_constant_diagonal(h)

    def lap(v):
        return codifferential(h, exterior_derivative(ScalarField(grid, v))).data

    def residual(v):
        return lap(v) + a * np.exp(v) - b * np.exp(-v) - wv

    g = residual(u)
    result = NewtonResult(ScalarField(grid, u), [float(np.max(np.abs(g)))])
    size = int(np.prod(grid.shape))
    while result.history[-1] > tol:
        if result.iterations >= maxiter:
            raise NewtonError(f"Newton did not converge in {maxiter} iterations "
                              f"(residual {result.history[-1]:.3e})", result.history)
        diag = a * np.exp(u) + b * np.exp(-u)
        op = LinearOperator((size, size), dtype=float,
                            matvec=lambda v: (lap(v.reshape(grid.shape)) + diag * v.reshape(grid.shape)).ravel())
        rhs = -g.ravel()
        count = [0]

        def tick(_):
            count[0] += 1

        if symmetric:
            step, info = cg(op, rhs, rtol=1e-14, atol=1e-15 * tol, maxiter=20 * size, callback=tick)
        else:
            step, info = gmres(op, rhs, rtol=1e-14, atol=1e-15 * tol, restart=200, maxiter=50,
                               callback=tick, callback_type="pr_norm")
        result.linear_iterations.append(count[0])
        step = step.reshape(grid.shape)
        # backtrack only if the full step fails to reduce the residual
        t = 1.0
        for _ in range(30):
            trial = u + t * step
            g_new = residual(trial)
            if np.max(np.abs(g_new)) < result.history[-1] or t < 1e-6:
                break
            t *= 0.5
        u, g = trial, g_new
        result.iterations += 1
        result.history.append(float(np.max(np.abs(g))))
    result.u = ScalarField(grid, u)
    return result


def elliptic_coefficients(p: AnsatzParams, h0: Metric):
    """``(A, B, w)`` of the conformal-factor equation for background ``h0``."""
    _require_2d(h0.grid)
    grid = h0.grid
    phi = p.phi.data
    f = p.f()
    a = p.F.F(phi) ** 2 + 0.5 * p.c ** 2 * np.exp(4.0 * phi) - 2.0 * f ** 2
    if p.theta_o is not None:
        b = -sym_norm2(h0, p.theta_o).data
    else:
        b = np.zeros(grid.shape)
    w = norm2(h0, exterior_derivative(p.phi)).data - scalar_curvature(h0).data
    return ScalarField(grid, a), ScalarField(grid, b), ScalarField(grid, w)


@dataclass
class ConstraintSolution:
    state: CauchyState
    newton: NewtonResult
    residuals: dict


def solve_conformal_constraints(p: AnsatzParams, h0: Metric, u0=None, tol: float = 1e-10,
                                maxiter: int = 50) -> ConstraintSolution:
    """Solve the restricted constraints on a flat torus, returning Cauchy data."""
    _require_2d(h0.grid)
    if scalar_curvature(h0).max_abs() > 1e-12:
        raise HypothesisError("flat background", "h0 must be flat")
    if p.theta_o is not None and p.theta_o.max_abs() > 0:
        raise HypothesisError("Theta_o = 0", "the solvable branch needs Theta_o = 0 (B = -|Theta_o|^2 >= 0)")
    A, B, w = elliptic_coefficients(p, h0)
    if np.min(A.data) < 0:
        raise HypothesisError("A >= 0", f"F^2 + (c^2/2)e^(4 phi) - 2(k + int F)^2 has minimum {np.min(A.data):.3e}")
    newton = solve_conformal_factor(h0, A, B, w, u0=u0, tol=tol, maxiter=maxiter)
    grid = h0.grid
    h = Metric(grid, np.exp(newton.u.data) * h0.data)
    theta, rho = build_momentum_ansatz(p, h)
    psi = psi_from_phi(p.c, p.phi, h)
    state = CauchyState(h, SymTensor2(grid, 2.0 * theta.data), p.phi, rho, psi, TwoForm.zeros(grid))
    res = constraint_residuals(state, EvolutionConfig(lam=0.0))
    norms = {"C1": res.norms["C1_max"], "C2": res.norms["C2_max"], "C3": res.norms["C3_max"]}
    return ConstraintSolution(state, newton, norms)
