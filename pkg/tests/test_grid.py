import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gerbeflow.grid import (CylinderGrid, Grid, GridError, NonFiniteError, OneForm, ScalarField,
                            SymTensor2, ThreeForm, TwoForm, VectorField, alt, exterior_derivative,
                            form_class, fundamental_period, integrate, packed_indices,
                            partial_derivative)
from gerbeflow.samples import analytic_form

from oracles import observed_order


def test_grid_validation():
    with pytest.raises(GridError):
        Grid((8, 8, 8, 8), (1, 1, 1, 1))
    with pytest.raises(GridError):
        Grid((8, 8), (1.0,))
    with pytest.raises(GridError):
        Grid((8, 8), (1.0, -1.0))
    with pytest.raises(GridError):
        Grid((4, 8), (1.0, 1.0))
    g = Grid((8, 16), (1.0, 2.0))
    assert g.n == g.dim == 2
    assert g.volume == pytest.approx(2.0)
    assert g.spacing == (0.125, 0.125)
    assert g.refine().shape == (16, 32)
    assert g == Grid((8, 16), (1.0, 2.0)) and g != Grid((8, 16), (1.0, 1.0))


def test_periodic_derivative_fourth_order():
    errs = []
    for N in (16, 32, 64):
        g = Grid((N,), (1.0,))
        (x,) = g.coords()
        f = np.sin(2 * np.pi * x) * np.exp(np.cos(2 * np.pi * x))
        exact = 2 * np.pi * np.exp(np.cos(2 * np.pi * x)) * (np.cos(2 * np.pi * x) - np.sin(2 * np.pi * x) ** 2)
        errs.append(np.max(np.abs(g.diff(f, 0) - exact)))
    assert observed_order(errs[1], errs[2]) >= 3.8


def test_open_stencil_exact_on_quartics():
    cyl = CylinderGrid(Grid((8,), (1.0,)), 12, 0.1, origin=-0.3)
    tau, _ = cyl.coords()
    f = 1.0 - 2.0 * tau + 3.0 * tau ** 2 - tau ** 3 + 0.5 * tau ** 4
    exact = -2.0 + 6.0 * tau - 3.0 * tau ** 2 + 2.0 * tau ** 3
    assert np.max(np.abs(cyl.diff(f, 0) - exact)) < 1e-11


def test_cylinder_validation_and_interior():
    space = Grid((8, 8), (1, 1))
    with pytest.raises(GridError):
        CylinderGrid(space, 8, 0.1)
    with pytest.raises(GridError):
        CylinderGrid(space, 9, -0.1)
    cyl = CylinderGrid(space, 12, 0.1, origin=1.0)
    assert cyl.dim == 3 and cyl.n == 2
    assert cyl.interior(4) == slice(4, 8)
    assert np.allclose(cyl.taus, 1.0 + 0.1 * np.arange(12))
    with pytest.raises(GridError):
        cyl.interior(6)


def test_field_shape_finite_and_symmetry_checks():
    g = Grid((8, 8), (1, 1))
    with pytest.raises(GridError):
        ScalarField(g, np.zeros((8, 9)))
    with pytest.raises(NonFiniteError):
        ScalarField(g, np.full((8, 8), np.nan))
    bad = np.zeros((2, 2, 8, 8))
    bad[0, 1] = 1.0
    with pytest.raises(GridError):
        SymTensor2(g, bad)
    with pytest.raises(GridError):
        TwoForm(g, bad)


def test_field_data_is_read_only():
    g = Grid((8, 8), (1, 1))
    f = ScalarField.zeros(g)
    with pytest.raises(ValueError):
        f.data[0, 0] = 1.0


def test_field_arithmetic():
    g = Grid((8, 8), (1, 1))
    a = OneForm(g, np.ones((2, 8, 8)))
    s = ScalarField(g, np.full((8, 8), 3.0))
    assert np.all((a + a).data == 2.0)
    assert np.all((a * s).data == 3.0)
    assert np.all((s * a).data == 3.0)
    assert np.all((2.0 * a - a).data == 1.0)
    with pytest.raises(TypeError):
        a + VectorField(g, np.ones((2, 8, 8)))


@given(st.integers(1, 3), st.sampled_from([("none", 1), ("sym", 2), ("antisym", 2), ("antisym", 3)]),
       st.integers(0, 2 ** 32 - 1))
def test_components_roundtrip(dim, kind, seed):
    symmetry, rank = kind
    if symmetry == "antisym" and rank > dim:
        return
    g = Grid((8,) * dim, (1.0,) * dim)
    cls = {("none", 1): OneForm, ("sym", 2): SymTensor2, ("antisym", 2): TwoForm,
           ("antisym", 3): ThreeForm}[kind]
    ncomp = len(packed_indices(rank, symmetry, dim))
    comps = np.random.default_rng(seed).normal(size=(ncomp,) + g.shape)
    f = cls.from_components(g, comps)
    assert np.array_equal(f.components(), comps)
    assert cls.from_components(g, f.components()).data.tobytes() == f.data.tobytes()


def test_packed_component_counts():
    assert len(packed_indices(2, "sym", 3)) == 6
    assert len(packed_indices(2, "antisym", 3)) == 3
    assert len(packed_indices(3, "antisym", 3)) == 1
    assert len(packed_indices(3, "antisym", 2)) == 0
    assert packed_indices(2, "antisym", 3) == [(0, 1), (0, 2), (1, 2)]


@given(st.integers(0, 2 ** 32 - 1))
def test_alt_is_a_projection(seed):
    arr = np.random.default_rng(seed).normal(size=(3, 3, 3, 4))
    once = alt(arr, 3)
    assert np.allclose(alt(once, 3), once, atol=1e-15)
    assert np.allclose(once, -np.swapaxes(once, 0, 1), atol=1e-15)


@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 1))
def test_d_squared_vanishes(seed, k):
    g = Grid((8, 10, 12), (1.0, 1.3, 0.7))
    alpha = analytic_form(g, k, np.random.default_rng(seed), modes=2) if k else \
        ScalarField(g, np.random.default_rng(seed).normal(size=g.shape))
    dd = exterior_derivative(exterior_derivative(alpha))
    assert dd.max_abs() <= 1e-11 * (1.0 + alpha.max_abs()) / min(g.spacing) ** 2


def test_exterior_derivative_rank_limit_and_type():
    g = Grid((8, 8), (1, 1))
    with pytest.raises(GridError):
        exterior_derivative(TwoForm.zeros(g))
    with pytest.raises(GridError):
        exterior_derivative(SymTensor2.zeros(g))
    assert form_class(3) is ThreeForm
    with pytest.raises(GridError):
        form_class(7)


def test_exterior_derivative_of_function_is_gradient():
    g = Grid((32, 32), (1, 2))
    x, y = g.coords()
    f = ScalarField(g, np.sin(2 * np.pi * x) * np.cos(np.pi * y))
    df = exterior_derivative(f)
    assert np.array_equal(df.data[1], partial_derivative(f, 1).data)
    exact = 2 * np.pi * np.cos(2 * np.pi * x) * np.cos(np.pi * y)
    assert np.max(np.abs(df.data[0] - exact)) < 1e-3


def test_integrate_and_periods():
    g = Grid((16, 12, 10), (1.0, 2.0, 0.5))
    x, y, z = g.coords()
    assert integrate(ScalarField(g, np.ones(g.shape))) == pytest.approx(g.volume, rel=1e-14)
    assert abs(integrate(ScalarField(g, np.sin(2 * np.pi * x)))) < 1e-14
    top = np.full(g.shape, 3.0)
    vol = ThreeForm.from_components(g, top[None])
    assert fundamental_period(vol, (0, 1, 2)) == pytest.approx(3.0 * g.volume, rel=1e-14)
    assert fundamental_period(vol, (1, 0, 2)) == pytest.approx(-3.0 * g.volume, rel=1e-14)
    with pytest.raises(GridError):
        fundamental_period(vol, (0, 1))
    with pytest.raises(GridError):
        fundamental_period(vol, (0, 0, 1))


def test_period_of_exact_form_vanishes():
    g = Grid((16, 16), (1, 1))
    x, y = g.coords()
    f = ScalarField(g, np.sin(2 * np.pi * x) + np.cos(4 * np.pi * y))
    df = exterior_derivative(f)
    for axis in (0, 1):
        assert abs(fundamental_period(df, (axis,))) < 1e-13
    assert math.isclose(fundamental_period(OneForm(g, np.ones((2, 16, 16))), (0,)), 1.0)
