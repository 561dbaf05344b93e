import math

import numpy as np

from jumpform._gamma import gamma


def test_matches_stdlib_on_positive_axis():
    xs = np.linspace(0.05, 10.0, 197)
    ours = gamma(xs)
    ref = np.array([math.gamma(float(x)) for x in xs])
    assert np.max(np.abs(ours / ref - 1.0)) < 1e-12


def test_reflection_negative_noninteger():
    xs = np.array([-0.5, -1.5, -0.25, -0.75, -1.99])
    ours = gamma(xs)
    ref = np.array([math.gamma(float(x)) for x in xs])
    assert np.max(np.abs(ours / ref - 1.0)) < 1e-11


def test_half_integer_values():
    assert math.isclose(float(gamma(0.5)), math.sqrt(math.pi), rel_tol=1e-14)
    assert math.isclose(float(gamma(1.5)), 0.5 * math.sqrt(math.pi), rel_tol=1e-14)
    assert math.isclose(float(gamma(5.0)), 24.0, rel_tol=1e-13)


def test_vectorized_shape():
    a = np.ones((3, 4)) * 2.5
    out = gamma(a)
    assert out.shape == (3, 4)
    assert np.allclose(out, math.gamma(2.5))
