import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lagrange_billiards.errors import DimensionError, OffSurfaceError
from lagrange_billiards.spaceform import (
    Geometry,
    SpaceForm,
    center_angle,
    check_on_surface,
    inner,
    norm,
    renormalize,
    tangent_project,
)

finite = st.floats(-10, 10, allow_nan=False)


def vec(k):
    return st.lists(finite, min_size=k, max_size=k).map(np.array)


def test_chart_inner_a0_is_dot():
    assert inner(SpaceForm.euclidean(2, 0.0), [1, 0, 0], [1, 0, 0]) == 1.0


def test_chart_inner_a1_halves_first_axis():
    assert inner(SpaceForm.euclidean(2, 1.0), [1, 0, 0], [1, 0, 0]) == pytest.approx(0.5, abs=1e-15)


def test_hyperbolic_branch_chart_uses_one_minus_a2():
    sp = SpaceForm.euclidean(3, 0.5, hyperbolic=True)
    assert inner(sp, [1, 0, 0, 0], [1, 0, 0, 0]) == pytest.approx(1 / 0.75)


def test_minkowski_timelike_unit():
    assert inner(SpaceForm.hyperbolic(3), [0, 0, 0, -1], [0, 0, 0, -1]) == -1.0


def test_norm_examples():
    assert norm(SpaceForm.euclidean(3, 1.0), [1, 0, 0, 0]) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert norm(SpaceForm.sphere(3), [0, 1, 0, 0]) == 1.0
    h = SpaceForm.hyperbolic(3)
    q = np.array([0.75, 0, 0, -1.25])
    assert norm(h, q) == pytest.approx(1.0, abs=1e-15)
    check_on_surface(h, q)


def test_norm_rejects_null_vector():
    with pytest.raises(ValueError):
        norm(SpaceForm.hyperbolic(3), [1, 0, 0, 1])


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        inner(SpaceForm.sphere(3), [1, 0, 0], [1, 0, 0, 0])


def test_space_validation():
    with pytest.raises(ValueError):
        SpaceForm.hyperbolic(3, 1.0)
    with pytest.raises(ValueError):
        SpaceForm.sphere(1)
    with pytest.raises(ValueError):
        SpaceForm.euclidean(3, math.inf)
    assert SpaceForm.sphere(3, 0.3).chart.curved == SpaceForm.sphere(3, 0.3)


def test_tangent_project_examples():
    np.testing.assert_allclose(tangent_project(SpaceForm.sphere(3), [0, 0, 0, -1], [1, 0, 0, 5]), [1, 0, 0, 0])
    np.testing.assert_allclose(tangent_project(SpaceForm.hyperbolic(3), [0, 0, 0, -1], [0, 1, 0, 3]), [0, 1, 0, 0])
    np.testing.assert_allclose(tangent_project(SpaceForm.euclidean(3), [0, 0, 0, -1], [1, 2, 3, 4]), [1, 2, 3, 0])


def test_tangent_project_rejects_off_surface():
    with pytest.raises(OffSurfaceError):
        tangent_project(SpaceForm.sphere(3), [0, 0, 0, -2], [1, 0, 0, 0])


def test_center_angle_examples():
    s = SpaceForm.sphere(3)
    z = np.array([0, 0, 0, -1.0])
    assert center_angle(s, z, z) == 0.0
    assert center_angle(s, [1, 0, 0, 0], z) == pytest.approx(math.pi / 2, abs=1e-15)
    h = SpaceForm.hyperbolic(3)
    assert center_angle(h, [0.75, 0, 0, -1.25], z) == pytest.approx(math.acosh(1.25), abs=1e-14)
    assert math.acosh(1.25) == pytest.approx(0.69315, abs=1e-5)


def _random_point(space, rng):
    x = rng.uniform(-0.45, 0.45, space.n)
    q = np.append(x, -1.0)
    k = space.curvature
    return q / math.sqrt(1 + k * np.dot(x, x))


@pytest.mark.parametrize("space", [SpaceForm.sphere(3), SpaceForm.hyperbolic(4)])
def test_center_angle_symmetric_and_matches_arc_formula(space, rng):
    for _ in range(50):
        q, z = _random_point(space, rng), _random_point(space, rng)
        th = center_angle(space, q, z)
        assert th == pytest.approx(center_angle(space, z, q), abs=1e-14)
        if space.kind is Geometry.SPHERE:
            assert math.cos(th) == pytest.approx(float(np.dot(q, z)), abs=1e-13)
        else:
            mink = float(np.dot(q[:-1], z[:-1]) - q[-1] * z[-1])
            assert math.cosh(th) == pytest.approx(-mink, rel=1e-13)


@pytest.mark.parametrize("space", [SpaceForm.euclidean(3, 0.7), SpaceForm.euclidean(3, 0.7, True), SpaceForm.sphere(3), SpaceForm.hyperbolic(3)])
@given(u=vec(4), v=vec(4), w=vec(4), s=finite)
def test_inner_symmetric_bilinear(space, u, v, w, s):
    assert inner(space, u, v) == pytest.approx(inner(space, v, u), abs=1e-12)
    lhs = inner(space, s * u + w, v)
    rhs = s * inner(space, u, v) + inner(space, w, v)
    assert lhs == pytest.approx(rhs, abs=1e-9 * (1 + abs(lhs)))


@given(u=vec(5), v=vec(5))
def test_a0_chart_is_standard_dot(u, v):
    assert inner(SpaceForm.euclidean(4, 0.0), u, v) == pytest.approx(float(np.dot(u[:-1], v[:-1])), abs=1e-12)


@pytest.mark.parametrize("space", [SpaceForm.sphere(4), SpaceForm.hyperbolic(4)])
@given(x=st.lists(st.floats(-0.44, 0.44), min_size=4, max_size=4).map(np.array), w=vec(5))
def test_tangent_project_idempotent_and_orthogonal(space, x, w):
    q = np.append(x, -1.0) / math.sqrt(1 + space.curvature * np.dot(x, x))
    p1 = tangent_project(space, q, w)
    p2 = tangent_project(space, q, p1)
    np.testing.assert_allclose(p2, p1, atol=1e-12 * (1 + np.abs(w).max()))
    amb = np.ones(5)
    amb[-1] = space.curvature
    assert abs(np.dot(amb * p1, q)) < 1e-12 * (1 + np.abs(w).max())


@pytest.mark.parametrize("space", [SpaceForm.sphere(3), SpaceForm.hyperbolic(3)])
def test_renormalize_restores_constraints(space, rng):
    for _ in range(20):
        q = _random_point(space, rng) * (1 + 1e-6 * rng.normal())
        v = rng.normal(size=4)
        q2, v2 = renormalize(space, q, v)
        check_on_surface(space, q2, tol=1e-14)
        amb = np.array([1, 1, 1, space.curvature])
        assert abs(np.dot(amb * q2, v2)) < 1e-13
