import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gerbeflow.cauchy import CauchyState, EvolutionConfig, constraint_residuals
from gerbeflow.constraint2d import (ANSATZ_FUNCTIONS, AnsatzParams, HypothesisError, NewtonError,
                                    build_momentum_ansatz, elliptic_coefficients, psi_from_phi,
                                    solve_conformal_constraints, solve_conformal_factor)
from gerbeflow.geometry import Metric, codifferential
from gerbeflow.grid import Grid, ScalarField, SymTensor2, TwoForm, exterior_derivative
from gerbeflow.samples import analytic_scalar


def torus(N):
    return Grid((N, N), (1, 1))


def sine_phi(g, amp):
    x, _ = g.coords()
    return ScalarField(g, amp * np.sin(2 * np.pi * x))


def const(g, v):
    return ScalarField(g, np.full(g.shape, float(v)))


def test_psi_trivial_cases():
    g = torus(16)
    h = Metric.euclidean(g)
    psi = psi_from_phi(1.0, ScalarField.zeros(g), h)
    assert np.all(psi.data[0, 1] == 1.0) and np.all(psi.data[1, 0] == -1.0)
    assert psi_from_phi(0.0, sine_phi(g, 0.2), h).max_abs() == 0.0
    with pytest.raises(ValueError, match="n = 2"):
        psi_from_phi(1.0, ScalarField.zeros(Grid((8, 8, 8), (1, 1, 1))), Metric.euclidean(Grid((8, 8, 8), (1, 1, 1))))


def _psi_c3(N):
    g = torus(N)
    phi = sine_phi(g, 0.2)
    s = CauchyState.flat(g).replace(phi=phi, psi=psi_from_phi(1.0, phi, Metric.euclidean(g)))
    return constraint_residuals(s, EvolutionConfig()).norms["C3_max"]


def test_psi_solves_flux_constraint_at_fourth_order():
    assert math.log2(_psi_c3(32) / _psi_c3(64)) >= 3.5


@pytest.mark.xfail(strict=True, reason="stencil truncation at N=64 is about 2e-4; see the ledger")
def test_psi_flux_constraint_absolute_bound():
    assert _psi_c3(64) <= 1e-6


def test_momentum_ansatz_trivial():
    g = torus(16)
    p = AnsatzParams(1.0, 0.0, "zero", analytic_scalar(g, np.random.default_rng(0)))
    theta, rho = build_momentum_ansatz(p, Metric.euclidean(g))
    assert theta.max_abs() == 0.0 and rho.max_abs() == 0.0


@pytest.mark.parametrize("F", ["const1", "linear"])
def test_momentum_ansatz_cancels_for_any_metric(F):
    vals = []
    for N in (32, 64):
        g = torus(N)
        phi = analytic_scalar(g, np.random.default_rng(0))
        h = Metric(g, np.exp(analytic_scalar(g, np.random.default_rng(1)).data) * np.eye(2)[:, :, None, None])
        theta, rho = build_momentum_ansatz(AnsatzParams(1.0, 0.5, F, phi), h)
        assert np.allclose(rho.data, -ANSATZ_FUNCTIONS[F].F(phi.data))
        s = CauchyState(h, SymTensor2(g, 2 * theta.data), phi, rho, psi_from_phi(1.0, phi, h), TwoForm.zeros(g))
        vals.append(constraint_residuals(s, EvolutionConfig()).norms["C1_max"])
    assert math.log2(vals[0] / vals[1]) >= 3.5


def test_theta_o_must_be_traceless():
    g = torus(8)
    bad = SymTensor2(g, np.eye(2)[:, :, None, None] * np.ones(g.shape))
    p = AnsatzParams(1.0, 0.0, "zero", ScalarField.zeros(g), theta_o=bad)
    with pytest.raises(HypothesisError, match="traceless"):
        build_momentum_ansatz(p, Metric.euclidean(g))
    with pytest.raises(ValueError, match="unknown F"):
        AnsatzParams(1.0, 0.0, "cubic", ScalarField.zeros(g))


def test_newton_constant_solution():
    g = torus(16)
    r = solve_conformal_factor(Metric.euclidean(g), const(g, 1), const(g, 0), const(g, 1))
    assert np.max(np.abs(r.u.data)) <= 1e-11 and r.iterations == 0


def manufactured(N):
    g = torus(N)
    h = Metric.euclidean(g)
    v = sine_phi(g, 0.3)
    ddv = codifferential(h, exterior_derivative(v)).data
    w = 15.0  # w = 1 would make A negative where the Laplacian of v exceeds 1
    A = ScalarField(g, np.exp(-v.data) * (w - ddv))
    return h, A, const(g, 0), const(g, w), v


@pytest.mark.parametrize("N", [32, 64])
def test_newton_manufactured_solution(N):
    h, A, B, w, v = manufactured(N)
    assert np.min(A.data) > 0
    r = solve_conformal_factor(h, A, B, w)
    assert np.max(np.abs(r.u.data - v.data)) <= 1e-9
    assert r.final_residual <= 1e-10
    # below ~1e-12 the residual is roundoff of the discrete Laplacian, not Newton error
    floor = 1e-12
    tail = [(a, b) for a, b in zip(r.history, r.history[1:]) if a < 1e-2]
    assert tail and all(b <= max(5 * a * a, floor) for a, b in tail)


def test_newton_gmres_on_nonconstant_metric():
    g = torus(32)
    h = Metric(g, np.exp(sine_phi(g, 0.2).data) * np.eye(2)[:, :, None, None])
    v = analytic_scalar(g, np.random.default_rng(4), 0.2)
    ddv = codifferential(h, exterior_derivative(v)).data
    A = ScalarField(g, np.exp(-v.data) * (60.0 - ddv))
    assert np.min(A.data) > 0
    r = solve_conformal_factor(h, A, const(g, 0), const(g, 60.0))
    assert np.max(np.abs(r.u.data - v.data)) <= 1e-9


@pytest.mark.parametrize("A,B,w,name", [
    (-1.0, 0.0, 1.0, "A >= 0"),
    (1.0, -1.0, 1.0, "B >= 0"),
    (1.0, 1.0, 1.0, "int (A - B) > 0"),
    (1.0, 0.0, 0.0, "int w > 0"),
])
def test_newton_hypotheses_named(A, B, w, name):
    g = torus(8)
    with pytest.raises(HypothesisError) as info:
        solve_conformal_factor(Metric.euclidean(g), const(g, A), const(g, B), const(g, w))
    assert info.value.hypothesis == name and name in str(info.value)


def test_newton_failure_reports_history():
    h, A, B, w, _ = manufactured(16)
    with pytest.raises(NewtonError) as info:
        solve_conformal_factor(h, A, B, w, maxiter=1)
    assert len(info.value.history) == 2 and info.value.history[-1] > 1e-10


def params(N, **kw):
    g = torus(N)
    base = dict(c=1.0, k=0.0, F="zero", phi=sine_phi(g, 0.3))
    base.update(kw)
    return AnsatzParams(**base), Metric.euclidean(g)


def test_conformal_constraints_converge():
    res = []
    for N in (32, 64):
        sol = solve_conformal_constraints(*params(N))
        assert sol.newton.final_residual <= 1e-10 and sol.residuals["C1"] == 0.0
        assert sol.state.theta.max_abs() == 0.0
        res.append(max(sol.residuals.values()))
    assert math.log2(res[0] / res[1]) >= 3.5


@pytest.mark.xfail(strict=True, reason="C3 truncation at N=64 is about 6e-4; see the ledger")
def test_conformal_constraints_absolute_bound():
    assert max(solve_conformal_constraints(*params(64)).residuals.values()) <= 1e-8


def test_three_starts_agree():
    p, h = params(32)
    us = [solve_conformal_constraints(p, h, u0=u0).newton.u.data for u0 in (None, -1.0, 1.5)]
    assert max(np.max(np.abs(u - us[0])) for u in us[1:]) <= 1e-8


def test_conformal_rejections():
    g = torus(16)
    with pytest.raises(HypothesisError, match="int w > 0"):
        solve_conformal_constraints(*params(16, phi=const(g, 0.4)))
    with pytest.raises(HypothesisError, match="A >= 0"):
        solve_conformal_constraints(*params(16, k=2.0))
    p, _ = params(16)
    curved = Metric(g, np.exp(sine_phi(g, 0.2).data) * np.eye(2)[:, :, None, None])
    with pytest.raises(HypothesisError, match="flat background"):
        solve_conformal_constraints(p, curved)
    traceless = np.zeros((2, 2) + g.shape)
    traceless[0, 1] = traceless[1, 0] = 0.1
    with pytest.raises(HypothesisError, match="Theta_o = 0"):
        solve_conformal_constraints(*params(16, theta_o=SymTensor2(g, traceless)))


@settings(max_examples=10)
@given(c=st.floats(0.5, 2.0), k=st.floats(-0.3, 0.3))
def test_coefficients_match_pointwise_condition(c, k):
    p, h = params(16, c=c, k=k, F="const1")
    A, B, w = elliptic_coefficients(p, h)
    phi = p.phi.data
    expected = 1.0 + 0.5 * c * c * np.exp(4 * phi) - 2.0 * (phi + k) ** 2
    assert np.allclose(A.data, expected, rtol=0, atol=1e-13)
    assert B.max_abs() == 0.0 and np.min(w.data) >= 0.0
