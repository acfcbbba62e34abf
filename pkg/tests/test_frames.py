import numpy as np
import pytest
from hypothesis import given, strategies as st

from gerbeflow.frames import (Frame, FrameError, FrameTag, conformal_identity_residuals,
                              einstein_hilbert_densities, to_einstein, to_string)
from gerbeflow.geometry import Metric
from gerbeflow.grid import Grid, ScalarField
from gerbeflow.samples import analytic_metric, analytic_scalar

from oracles import observed_order


@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 3))
def test_frame_roundtrip(seed, n):
    g = Grid((8,) * (n + 1) if n == 2 else (8, 8, 8), (1.0,) * (n + 1) if n == 2 else (1.0,) * 3)
    if g.dim != n + 1:
        return
    rng = np.random.default_rng(seed)
    h = analytic_metric(g, rng)
    phi = analytic_scalar(g, rng, 0.5)
    back = to_string(to_einstein(h, phi, n), phi, n)
    assert np.max(np.abs(back.data - h.data)) < 1e-14


def test_frame_dimension_checks():
    g = Grid((8, 8, 8), (1, 1, 1))
    h, phi = Metric.euclidean(g), ScalarField.zeros(g)
    with pytest.raises(FrameError):
        to_einstein(h, phi, 1)
    with pytest.raises(FrameError):
        to_einstein(h, phi, 3)
    with pytest.raises(FrameError):
        to_einstein(h, ScalarField.zeros(Grid((8, 8, 10), (1, 1, 1))), 2)
    with pytest.raises(FrameError):
        FrameTag(Frame.STRING, 0)
    assert FrameTag(Frame.EINSTEIN, 2).frame is Frame.EINSTEIN


def test_constant_dilaton_is_exact():
    g = Grid((12, 12, 12), (1, 1, 1))
    h = analytic_metric(g, np.random.default_rng(3))
    phi = ScalarField(g, np.full(g.shape, 0.4))
    assert max(conformal_identity_residuals(h, phi, 2).maxima()) < 1e-10
    lhs, rhs, kinetic = einstein_hilbert_densities(h, phi, 2)
    assert kinetic == 0.0
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_conformal_identities_converge():
    vals = []
    for N in (16, 32):
        g = Grid((N, N, N), (1, 1, 1))
        rng = np.random.default_rng(11)
        vals.append(conformal_identity_residuals(analytic_metric(g, rng), analytic_scalar(g, rng), 2).maxima())
    orders = [observed_order(a, b) for a, b in zip(*vals)]
    assert min(orders) >= 3.5


def test_density_identity_with_kinetic_term():
    """For nonconstant phi the curvature densities differ by n/(n-1) times the kinetic term."""
    gaps = []
    for N in (16, 32):
        g = Grid((N, N, N), (1, 1, 1))
        rng = np.random.default_rng(4)
        h = analytic_metric(g, rng)
        phi = analytic_scalar(g, rng, 0.3)
        lhs, rhs, kinetic = einstein_hilbert_densities(h, phi, 2)
        assert kinetic > 1e-3
        assert abs(lhs - rhs) > 0.1 * kinetic
        gaps.append(abs(lhs - (rhs - 2.0 * kinetic)))
    assert observed_order(*gaps) >= 3.5
