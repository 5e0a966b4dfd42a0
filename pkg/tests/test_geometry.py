import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypvoronoi.geometry import (
    DegeneracyError,
    GeometryError,
    HPoint,
    boost_to_origin,
    cosh_distance,
    euclidean_circumcircle,
    euclidean_radius,
    hyp_ball_volume,
    hyp_circumcenter_d2,
    hyp_distance,
    hyp_distance_many,
    hyperbolic_circle_to_euclidean,
    hyperbolic_radius,
    hyperboloid_to_poincare,
    klein_to_poincare,
    mobius_add,
    poincare_to_hyperboloid,
    poincare_to_klein,
    radial_volume,
)

disk = st.tuples(st.floats(0, 0.95), st.floats(0, 2 * math.pi)).map(
    lambda t: np.array([t[0] * math.cos(t[1]), t[0] * math.sin(t[1])]))


def ref_distance(x, y):
    # arccosh form, in 50-digit arithmetic
    mpmath.mp.dps = 50
    x = [mpmath.mpf(float(v)) for v in x]
    y = [mpmath.mpf(float(v)) for v in y]
    num = sum((a - b) ** 2 for a, b in zip(x, y))
    den = (1 - sum(a * a for a in x)) * (1 - sum(b * b for b in y))
    return float(mpmath.acosh(1 + 2 * num / den))


def test_distance_frozen_values():
    assert hyp_distance([0, 0], [0.5, 0]) == pytest.approx(math.log(3.0), rel=1e-14)
    assert hyp_distance([0.3, -0.2], [-0.1, 0.6]) == pytest.approx(ref_distance([0.3, -0.2], [-0.1, 0.6]), rel=1e-13)
    assert hyp_distance(HPoint.polar(2.0, 1.0), HPoint.origin()) == pytest.approx(2.0, rel=1e-14)


def test_distance_dimension_mismatch():
    with pytest.raises(GeometryError):
        hyp_distance([0, 0], [0, 0, 0])


def test_radius_conversions():
    assert euclidean_radius(0.0) == 0.0
    assert hyperbolic_radius(euclidean_radius(3.7)) == pytest.approx(3.7, rel=1e-13)
    with pytest.raises(GeometryError):
        hyperbolic_radius(1.0)
    with pytest.raises(GeometryError):
        euclidean_radius(-1.0)


@pytest.mark.parametrize("r", [0.1, 1.0, 3.0, 7.5])
def test_ball_volume_d2(r):
    assert hyp_ball_volume(r) == pytest.approx(2 * math.pi * (math.cosh(r) - 1), rel=1e-12)
    assert float(radial_volume(r)) == pytest.approx(hyp_ball_volume(r), rel=1e-12)


@pytest.mark.parametrize("d", [3, 4, 5])
def test_ball_volume_higher_dims(d):
    # quadrature against the closed-form recurrence
    assert float(radial_volume(2.0, d)) == pytest.approx(hyp_ball_volume(2.0, d), rel=1e-9)
    # d = 3: pi (sinh 2r - 2r)
    if d == 3:
        assert hyp_ball_volume(2.0, 3) == pytest.approx(math.pi * (math.sinh(4.0) - 4.0), rel=1e-9)


def test_collinear_circumcircle():
    with pytest.raises(DegeneracyError):
        euclidean_circumcircle([0, 0], [0.1, 0.1], [0.2, 0.2])


@settings(max_examples=200, deadline=None)
@given(disk, disk)
def test_distance_matches_reference(x, y):
    assert hyp_distance(x, y) == pytest.approx(ref_distance(x, y), rel=1e-9, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(disk, disk, disk)
def test_metric_axioms(x, y, z):
    dxy, dyx = hyp_distance(x, y), hyp_distance(y, x)
    assert dxy == dyx
    assert dxy <= hyp_distance(x, z) + hyp_distance(z, y) + 1e-9
    assert hyp_distance_many(np.array([x, y]), z) == pytest.approx([hyp_distance(x, z), hyp_distance(y, z)])


@settings(max_examples=200, deadline=None)
@given(disk, disk)
def test_coordinate_models_agree(x, y):
    hx, hy = poincare_to_hyperboloid(x), poincare_to_hyperboloid(y)
    assert hx[0] ** 2 - hx[1:] @ hx[1:] == pytest.approx(1.0, rel=1e-9)
    assert np.allclose(hyperboloid_to_poincare(hx), x, atol=1e-12)
    assert np.allclose(klein_to_poincare(poincare_to_klein(x)), x, atol=1e-12)
    d = math.acosh(max(float(cosh_distance(hx, hy)), 1.0))
    assert d == pytest.approx(hyp_distance(x, y), rel=1e-7, abs=1e-6)
    # Klein norm is tanh of the distance to 0
    assert np.linalg.norm(poincare_to_klein(x)) == pytest.approx(math.tanh(hyp_distance(x, [0, 0])), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(disk, disk, disk)
def test_isometries_preserve_distance(a, x, y):
    ha, hx, hy = (poincare_to_hyperboloid(v) for v in (a, x, y))
    m = boost_to_origin(ha)
    assert np.allclose(m @ ha, [1, 0, 0], atol=1e-8 * ha[0] ** 2)
    c1 = float(cosh_distance(m @ hx, m @ hy))
    assert c1 == pytest.approx(float(cosh_distance(hx, hy)), rel=1e-7)
    assert hyp_distance(mobius_add(a, x), mobius_add(a, y)) == pytest.approx(hyp_distance(x, y), rel=1e-7, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(disk, st.floats(0.01, 3.0), st.floats(0, 2 * math.pi))
def test_hyperbolic_circle_image(c, r, ang):
    ec, er = hyperbolic_circle_to_euclidean(c, r)
    if np.linalg.norm(ec) + er > 1 - 1e-9:
        return
    q = ec + er * np.array([math.cos(ang), math.sin(ang)])
    assert hyp_distance(q, c) == pytest.approx(r, rel=1e-6)


@settings(max_examples=100, deadline=None)
@given(disk, disk, disk)
def test_circumcenter_equidistant(a, b, c):
    try:
        cc = hyp_circumcenter_d2(a, b, c)
    except DegeneracyError:
        return
    if cc is None:
        return
    da, db, dc = (hyp_distance(cc, v) for v in (a, b, c))
    assert da == pytest.approx(db, rel=1e-5, abs=1e-7)
    assert da == pytest.approx(dc, rel=1e-5, abs=1e-7)
