import itertools
import math

import numpy as np
import pytest

from poisson_concentration.geometry.hull import convex_hull
from poisson_concentration.geometry.intrinsic import (
    ball_intrinsic_volume,
    cauchy_kubota,
    cube_intrinsic_volume,
    ellipsoid_intrinsic_volume,
    exact_intrinsic_volumes,
    external_angle,
    intrinsic_volume,
    intrinsic_volumes,
    simplex_volumes,
    unit_ball_volume,
)


def _cube(d, side=1.0):
    return side * np.array(list(itertools.product([0.0, 1.0], repeat=d)))


def test_ball_constants():
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)
    assert ball_intrinsic_volume(3, 1) == pytest.approx(4.0)      # mean width multiple
    assert ball_intrinsic_volume(3, 2) == pytest.approx(2 * math.pi)
    assert ball_intrinsic_volume(2, 1, 2.0) == pytest.approx(2 * math.pi)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_cube(d):
    for i, est in enumerate(intrinsic_volumes(convex_hull(_cube(d, 2.0)), 20000, rng=4)):
        assert abs(est.value - cube_intrinsic_volume(d, i, 2.0)) <= max(3 * est.se, 1e-10)


def test_facet_angle_is_half(rng):
    h = convex_hull(rng.normal(size=(30, 4)))
    for face, facets in zip(h.faces(3), h.face_facets(3)):
        assert external_angle(h, face, facets).value == 0.5


def test_vertex_angles_sum_to_one(rng):
    h = convex_hull(rng.normal(size=(25, 3)))
    total = sum(external_angle(h, f, fs, 20000, rng).value
                for f, fs in zip(h.faces(0), h.face_facets(0)))
    assert total == pytest.approx(1.0, abs=0.02)


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_top_orders_exact(d, rng):
    h = convex_hull(rng.normal(size=(30, d)))
    assert intrinsic_volume(h, d - 1).value == pytest.approx(0.5 * h.surface, rel=1e-10, abs=1e-10)
    assert intrinsic_volume(h, d).value == pytest.approx(h.volume)
    assert intrinsic_volume(h, 0).value == 1.0


def test_exact_path_matches_lattice(rng):
    for d in (2, 3):
        pts = rng.normal(size=(60, d))
        lattice = [v.value for v in intrinsic_volumes(convex_hull(pts))]
        assert np.allclose(exact_intrinsic_volumes(pts), lattice, rtol=1e-12, atol=1e-12)


def test_exact_path_lower_dimensional():
    square = np.array([[0, 0, 0], [2, 0, 0], [0, 2, 0], [2, 2, 0]], float)
    assert np.allclose(exact_intrinsic_volumes(square), [1.0, 4.0, 4.0, 0.0])
    with pytest.raises(ValueError):
        exact_intrinsic_volumes(np.random.default_rng(0).normal(size=(10, 4)))


def test_simplex_volumes():
    tri = np.array([[[0, 0], [1, 0], [0, 1]], [[0, 0], [2, 0], [0, 2]]], float)
    assert np.allclose(simplex_volumes(tri), [0.5, 2.0])


def test_face_formula_vs_projections():
    gen = np.random.default_rng(12)
    for _ in range(5):
        d = int(gen.integers(3, 5))
        pts = gen.normal(size=(12, d))
        h = convex_hull(pts)
        for i in range(1, d):
            face = intrinsic_volume(h, i, 4000, gen)
            proj = cauchy_kubota(pts, i, 1500, gen)
            assert abs(face.value - proj.value) <= 3 * math.hypot(face.se, proj.se) + 1e-9


def test_ellipsoid_projection_estimator():
    est = ellipsoid_intrinsic_volume([1.0, 1.0, 1.0], 1, 20000)
    assert est.value == pytest.approx(4.0, rel=1e-9)  # sphere: every projection is a unit disc
    est = ellipsoid_intrinsic_volume([1.0, 2.0, 0.5], 2, 50000)
    # V_2 is half the surface area, about 15.87 / 2
    assert abs(est.value - 7.935) < 3 * est.se + 0.01
