import numpy as np
import pytest
from numba import njit

from chemofv.mesh import FieldError, Grid, integrate, laplacian_neumann
from chemofv.model import (ClampCounter, ModelParams, f_consumption, register_consumption, rhs_original,
                           rhs_transformed, sensitivity, v_to_w, w_to_v)

P = ModelParams(chi=2.0, gamma=0.5, beta=0.5, v0_max=1.0)


def smooth_pair(g):
    X, Y = g.centers()
    u = 1 + 0.5 * np.cos(np.pi * X) * np.cos(2 * np.pi * Y)
    v = 0.5 + 0.2 * np.cos(2 * np.pi * X) * np.cos(np.pi * Y)
    return g.field(u), g.field(v)


def test_params_validation():
    with pytest.raises(ValueError, match="gamma must lie in"):
        ModelParams(1.0, 1.5, 0.5)
    with pytest.raises(ValueError):
        ModelParams(1.0, 0.5, 0.0)
    with pytest.raises(ValueError):
        ModelParams(1.0, 0.5, 0.5, v_floor=1e-6)
    with pytest.raises(ValueError):
        ModelParams(-1.0, 0.5, 0.5)
    with pytest.raises(ValueError):
        ModelParams(1.0, 0.5, 0.5).coef


def test_f_consumption_examples():
    assert f_consumption(0.0, 0.3) == 0.0
    assert f_consumption(1.0, 0.5) == 1.0
    assert f_consumption(4.0, 0.5) == 2.0
    assert f_consumption(-3.0, 0.5) == 0.0
    assert f_consumption(2.0, 0.7) == pytest.approx(2.0**0.7, rel=1e-15)


def test_sensitivity_examples():
    assert sensitivity(1.0, ModelParams(2.0, 0.5, 0.5)) == 2.0
    assert sensitivity(0.25, ModelParams(1.0, 0.5, 0.5)) == 2.0
    c = ClampCounter()
    assert sensitivity(0.0, ModelParams(1.0, 0.5, 0.5), c) == pytest.approx(1e6, rel=1e-12)
    assert c.count == 1


def test_rhs_original_constant_states():
    g = Grid(6, 6)
    r = rhs_original(g.constant(1.0), g.constant(1.0), P)
    assert not r.du.values.any()
    np.testing.assert_allclose(r.second.values, -1.0)
    r = rhs_original(g.constant(4.0), g.constant(0.3), P)
    assert not r.du.values.any()
    np.testing.assert_allclose(r.second.values, -2.0 * 0.3, rtol=1e-15)


def test_rhs_original_zero_cells():
    g = Grid(8, 8)
    _, v = smooth_pair(g)
    r = rhs_original(g.constant(0.0), v, P)
    assert not r.du.values.any()
    np.testing.assert_allclose(r.second.values, laplacian_neumann(v).values, rtol=1e-13)


def test_rhs_transformed_constant_states():
    g = Grid(6, 6)
    r = rhs_transformed(g.constant(1.0), g.constant(0.0), P)
    assert not r.du.values.any()
    np.testing.assert_allclose(r.second.values, 1.0)
    assert not rhs_transformed(g.constant(0.0), g.constant(0.0), P).second.values.any()
    r = rhs_transformed(g.constant(9.0), g.constant(0.7), P)
    np.testing.assert_allclose(r.second.values, 3.0, rtol=1e-15)


def test_rhs_shape_mismatch():
    with pytest.raises(FieldError):
        rhs_original(Grid(4, 4).constant(1.0), Grid(5, 4).constant(1.0), P)
    with pytest.raises(FieldError):
        rhs_transformed(Grid(4, 4).constant(1.0), Grid(4, 5).constant(0.0), P)


def test_rhs_conserves_mass():
    g = Grid(16, 12)
    u, v = smooth_pair(g)
    for r in (rhs_original(u, v, P), rhs_transformed(u, v_to_w(v, 1.0), P)):
        assert abs(integrate(r.du)) <= 1e-12 * (1 + u.values.max()) * g.area


def test_chi_zero_reduces_to_heat():
    g = Grid(10, 10)
    u, v = smooth_pair(g)
    p = ModelParams(0.0, 0.5, 0.5, v0_max=1.0)
    lap = laplacian_neumann(u).values
    # flux differencing and the 5-point stencil round differently
    tol = 1e-13 * np.max(np.abs(lap))
    np.testing.assert_allclose(rhs_original(u, v, p).du.values, lap, rtol=0, atol=tol)
    np.testing.assert_allclose(rhs_transformed(u, v_to_w(v, 1.0), p).du.values, lap, rtol=0, atol=tol)


def test_original_clamps_counted():
    g = Grid(5, 5)
    v = np.full(g.shape, 0.5)
    v[2, 2] = 0.0
    v[2, 3] = 0.0
    r = rhs_original(g.constant(1.0), g.field(v), P)
    assert r.clamp_events == 1  # only the face between the two zero cells


def test_upwind_keeps_zero_cell_nonnegative():
    g = Grid(9, 9)
    u, v = smooth_pair(g)
    uv = u.values.copy()
    uv[4, 4] = 0.0
    r = rhs_original(g.field(uv), v, P)
    assert r.du.values[4, 4] >= 0


def test_v_w_examples():
    g = Grid(4, 4)
    assert not v_to_w(g.constant(0.3), 0.3).values.any()
    np.testing.assert_allclose(v_to_w(g.constant(0.3 * np.exp(-1)), 0.3).values, 1.0, rtol=1e-15)
    rng = np.random.default_rng(3)
    v = g.field(rng.uniform(1e-6, 2.0, g.shape))
    np.testing.assert_allclose(w_to_v(v_to_w(v, 2.0), 2.0).values, v.values, rtol=1e-12)
    with pytest.raises(ValueError):
        v_to_w(v, 0.0)
    with pytest.raises(ValueError):
        w_to_v(v, -1.0)


def test_w_to_v_floor_counts():
    g = Grid(3, 3)
    c = ClampCounter()
    w = np.zeros(g.shape)
    w[0, 0] = 100.0
    v = w_to_v(g.field(w), 1.0, 1e-12, c)
    assert v.values[0, 0] == 1e-12 and c.count == 1


def test_register_consumption():
    @njit
    def half(s, beta):
        return 0.5 * max(s, 0.0) ** beta

    register_consumption("half-power", half)
    p = ModelParams(1.0, 0.5, 0.5, v0_max=1.0, consumption="half-power")
    np.testing.assert_allclose(p.consume(np.array([4.0, 0.0])), [1.0, 0.0])
    g = Grid(4, 4)
    r = rhs_original(g.constant(4.0), g.constant(1.0), p)
    np.testing.assert_allclose(r.second.values, -1.0)

    def too_big(s, beta):
        return 2.0 * s

    with pytest.raises(ValueError, match="violates"):
        register_consumption("too-big", too_big)
