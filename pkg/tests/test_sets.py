import numpy as np
import pytest

from ermconc import Ball, Box, ConfigurationError, Ellipsoid, FiniteSet, Simplex, Whole
from ermconc.sets import project_l1_ball, project_simplex


def test_simplex_projection_known_points():
    np.testing.assert_allclose(project_simplex(np.array([1.0, 1.0])), [0.5, 0.5])
    np.testing.assert_allclose(project_simplex(np.array([2.0, 0.0])), [1.0, 0.0])
    np.testing.assert_allclose(project_simplex(np.array([0.2, 0.3, 0.5])), [0.2, 0.3, 0.5])


def test_l1_ball_projection():
    np.testing.assert_allclose(project_l1_ball(np.array([2.0, 0.0]), 1.0), [1.0, 0.0])
    np.testing.assert_allclose(project_l1_ball(np.array([0.2, -0.3]), 1.0), [0.2, -0.3])
    p = project_l1_ball(np.array([3.0, -1.0, 0.5]), 2.0)
    assert abs(np.abs(p).sum() - 2.0) < 1e-12


def test_box_and_ball_projection():
    box = Box([-1.0, 0.0], [1.0, 2.0])
    np.testing.assert_allclose(box.project(np.array([3.0, -1.0])), [1.0, 0.0])
    ball = Ball(1.0, center=np.array([1.0, 1.0]))
    np.testing.assert_allclose(ball.project(np.array([4.0, 5.0])), [1.6, 1.8])


def test_ellipsoid_projection_kkt():
    E = Ellipsoid(np.array([1.0, 4.0, 9.0]), 1.0)
    x = np.array([2.0, 1.0, -1.0])
    p = E.project(x)
    assert abs(E.value(p) - 1.0) < 1e-9
    # x - p is parallel to W p
    r = (x - p) / (E.weights * p)
    np.testing.assert_allclose(r, r[0], rtol=1e-6)


def test_whole_and_finite():
    np.testing.assert_allclose(Whole(2).project(np.array([5.0, -5.0])), [5.0, -5.0])
    F = FiniteSet(np.array([[0.0, 0.0], [1.0, 1.0]]))
    np.testing.assert_allclose(F.project(np.array([0.9, 0.7])), [1.0, 1.0])
    assert Simplex(3).contains(np.array([0.2, 0.3, 0.5]))


def test_invalid_domains():
    with pytest.raises(ConfigurationError):
        Ball(-1.0)
    with pytest.raises(ConfigurationError):
        Ball(1.0, norm="linf")
