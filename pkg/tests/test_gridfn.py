import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jumpform import Box, DomainError, GridFunction


# ============================================================================
# Box
# ============================================================================


def test_box_validation():
    with pytest.raises(DomainError):
        Box((0.0,), (0.0,))
    with pytest.raises(DomainError):
        Box((0.0, 0.0), (1.0,))
    with pytest.raises(DomainError):
        Box((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))


def test_box_lattices():
    b = Box((-1.0,), (1.0,))
    pts, h = b.node_lattice(5)
    assert pts.shape == (5, 1)
    assert math.isclose(h, 0.5)
    assert math.isclose(float(pts[0, 0]), -1.0)
    assert math.isclose(float(pts[-1, 0]), 1.0)

    cpts, cvol = b.cell_lattice(4)
    assert cpts.shape == (4, 1)
    assert math.isclose(cvol, 0.5)
    # midpoints sit strictly inside
    assert np.all(b.contains(cpts))


def test_box_lattices_2d():
    b = Box((0.0, 0.0), (1.0, 1.0))
    pts, h = b.node_lattice(3)
    assert pts.shape == (9, 2)
    assert math.isclose(h, 0.5)
    cpts, cvol = b.cell_lattice(2)
    assert cpts.shape == (4, 2)
    assert math.isclose(cvol, 0.25)


def test_box_contains():
    b = Box((-1.0, -1.0), (1.0, 1.0))
    inside = np.array([[0.0, 0.0], [0.99, -0.99]])
    outside = np.array([[1.01, 0.0], [0.0, -2.0]])
    assert np.all(b.contains(inside))
    assert not np.any(b.contains(outside))


# ============================================================================
# bump functions
# ============================================================================


def test_bump_center_value_and_support():
    u = GridFunction.bump(0.0, 1.0, amplitude=2.0)
    assert math.isclose(float(u(np.array([0.0]))), 2.0, rel_tol=1e-14)
    assert float(u(np.array([1.0]))) == 0.0
    assert float(u(np.array([3.0]))) == 0.0


def test_bump_gradient_matches_finite_differences():
    u = GridFunction.bump((0.2,), 1.5)
    h = 1e-6
    for x in (-0.7, 0.0, 0.5, 1.1):
        fd = (float(u(np.array([x + h]))) - float(u(np.array([x - h])))) / (2 * h)
        g = float(u.grad(np.array([x]))[0])
        assert math.isclose(g, fd, rel_tol=1e-5, abs_tol=1e-7), (x, g, fd)


def test_bump_hessian_matches_finite_differences_2d():
    u = GridFunction.bump((0.0, 0.1), 1.2)
    x = np.array([0.3, -0.2])
    h = 1e-4
    H = u.hess(x)
    assert H.shape == (2, 2)
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (u.grad(x + e) - u.grad(x - e)) / (2 * h)
        assert np.allclose(H[i], fd, rtol=1e-4, atol=1e-6)


def test_bump_rejects_bad_radius():
    with pytest.raises(DomainError):
        GridFunction.bump(0.0, 0.0)
    with pytest.raises(DomainError):
        GridFunction.bump(0.0, -1.0)


# ============================================================================
# plane waves
# ============================================================================


def test_wave_values():
    u = GridFunction.wave(2.0, "cos")
    v = GridFunction.wave(2.0, "sin")
    x = np.array([0.7])
    assert math.isclose(float(u(x)), math.cos(1.4), rel_tol=1e-14)
    assert math.isclose(float(v(x)), math.sin(1.4), rel_tol=1e-14)
    assert math.isclose(float(u.grad(x)[0]), -2.0 * math.sin(1.4), rel_tol=1e-13)
    assert math.isclose(float(u.hess(x)[0, 0]), -4.0 * math.cos(1.4), rel_tol=1e-13)


def test_wave_rejects_unknown_kind():
    with pytest.raises(DomainError):
        GridFunction.wave(1.0, "tan")


# ============================================================================
# sampled functions
# ============================================================================


def test_sampled_interpolates_nodes():
    box = Box((-1.0,), (1.0,))
    pts, h = box.node_lattice(9)
    vals = np.maximum(0.0, 1.0 - np.abs(pts[:, 0]) / 0.9)
    vals[0] = vals[-1] = 0.0
    u = GridFunction.sampled(box, vals)
    got = u(pts)
    assert np.allclose(got, vals, atol=1e-13)
    # midpoint of two nodes is the average for a linear interpolant
    mid = 0.5 * (pts[3] + pts[4])
    assert math.isclose(float(u(mid)), 0.5 * (vals[3] + vals[4]), rel_tol=1e-12)
    # zero outside the box
    assert float(u(np.array([1.7]))) == 0.0


def test_sampled_boundary_ring_enforced():
    box = Box((-1.0,), (1.0,))
    vals = np.ones(5)
    with pytest.raises(DomainError):
        GridFunction.sampled(box, vals)


def test_sampled_needs_enough_nodes():
    box = Box((0.0,), (1.0,))
    with pytest.raises(DomainError):
        GridFunction.sampled(box, np.zeros(2))


def test_to_sampled_round_trip():
    u = GridFunction.bump(0.0, 1.0)
    us = u.to_sampled(65)
    pts = np.linspace(-0.8, 0.8, 11)[:, None]
    err = np.max(np.abs(us(pts) - u(pts)))
    assert err < 5e-3, err


@given(st.floats(min_value=-2.0, max_value=2.0))
@settings(deadline=None, max_examples=50)
def test_bump_range_property(x):
    u = GridFunction.bump(0.0, 1.0, amplitude=1.0)
    v = float(u(np.array([x])))
    assert 0.0 <= v <= 1.0
