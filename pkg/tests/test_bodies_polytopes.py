import math

import numpy as np
import pytest
from scipy import stats

from poisson_concentration.calculus import estimate_variance_proxies
from poisson_concentration.errors import CertificateError, ConfigurationError
from poisson_concentration.geometry.bodies import ConvexBodySpec, sample_model
from poisson_concentration.geometry.intrinsic import exact_intrinsic_volumes
from poisson_concentration.geometry.polytopes import (
    PolytopeFunctional,
    polytope_profile,
    polytope_proxy_certificates,
    run_polytope_certificates,
    run_polytope_concentration,
    zeta_content,
)
from poisson_concentration.poisson import PointConfiguration
from poisson_concentration.streams import RandomStream

SIMPLEX3 = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]], float)


def test_body_validation():
    with pytest.raises(ConfigurationError):
        ConvexBodySpec.ball(1)
    with pytest.raises(ConfigurationError):
        ConvexBodySpec.ball(2, radius=-1.0)
    with pytest.raises(ConfigurationError):
        ConvexBodySpec.cube(3).intensity("Bd", 10.0)
    with pytest.raises(ConfigurationError):
        ConvexBodySpec.ball(2).intensity("Out", 10.0)


@pytest.mark.parametrize("body", [
    ConvexBodySpec.ball(3, 2.0),
    ConvexBodySpec.cube(2, 3.0),
    ConvexBodySpec.ellipsoid([1.0, 2.0, 0.5]),
    ConvexBodySpec.polytope(SIMPLEX3),
])
def test_interior_samples_fill_body(body, rng):
    x = body.sample_interior(rng, 4000)
    assert np.all(body.contains(x, tol=1e-12))
    assert np.all(np.linalg.norm(x, axis=1) <= body.circumradius + 1e-12)
    # the box hit fraction estimates the volume
    r = body.circumradius
    y = rng.uniform(-r, r, size=(200000, body.dim))
    frac = body.contains(y).mean()
    se = math.sqrt(frac * (1 - frac) / y.shape[0])
    assert abs(frac * (2 * r) ** body.dim - body.volume) < 4 * se * (2 * r) ** body.dim


def test_simplex_interior_is_uniform(rng):
    # first coordinate of a uniform point in the standard 3-simplex is Beta(1, 3)
    x = ConvexBodySpec.polytope(SIMPLEX3).sample_interior(rng, 5000)
    assert stats.kstest(x[:, 0], stats.beta(1, 3).cdf).pvalue > 1e-3


def test_ellipsoid_boundary(rng):
    body = ConvexBodySpec.ellipsoid([1.0, 2.0, 0.5])
    x = body.sample_boundary(rng, 20000)
    assert np.allclose(np.sum((x / body.semi_axes) ** 2, axis=1), 1.0, atol=1e-12)
    # area of the cap z > 0.25 compared with the surface-measure fraction
    assert abs(np.mean(x[:, 2] > 0) - 0.5) < 0.015
    assert body.surface_area == pytest.approx(15.87, abs=0.05)


def test_ball_boundary(rng):
    x = ConvexBodySpec.ball(2, 3.0).sample_boundary(rng, 1000)
    assert np.allclose(np.linalg.norm(x, axis=1), 3.0)


def test_sample_model_counts(rng):
    body = ConvexBodySpec.ball(2)
    n = [len(sample_model(body, "In", 20.0, rng)) for _ in range(2000)]
    assert abs(np.mean(n) - 20.0) < 4 * math.sqrt(20.0 / 2000)


def test_zeta_content():
    body = ConvexBodySpec.cube(3, 2.0)
    assert zeta_content(SIMPLEX3, body).value == pytest.approx(1 / 48)
    assert zeta_content(SIMPLEX3[:3], body).value == 0.0
    corners = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], float)
    assert zeta_content(corners, body).value == pytest.approx(1.0)
    est = zeta_content(SIMPLEX3, body, method="mc", n_samples=200000, rng=3)
    assert abs(est.value - 1 / 48) < 4 * est.se


def test_functional_parsing():
    assert PolytopeFunctional.parse("zeta").kind == "zeta"
    assert PolytopeFunctional.parse("V_2").i == 2
    assert PolytopeFunctional.parse("V1").label == "V1"
    with pytest.raises(ConfigurationError):
        PolytopeFunctional.parse("W2")
    with pytest.raises(ConfigurationError):
        PolytopeFunctional("intrinsic", 4).check_body(ConvexBodySpec.ball(3))


def test_profile_high_dimension_is_deterministic(rng):
    pts = rng.normal(size=(20, 4))
    a, _ = polytope_profile(pts, 4)
    b, _ = polytope_profile(pts[::-1], 4)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("i", [1, 2, 3])
def test_exact_simplex_proxy(i, rng):
    pts = rng.uniform(-0.5, 0.5, size=(i + 1, 3))
    report = polytope_proxy_certificates(PointConfiguration(pts, 3), ConvexBodySpec.ball(3), "In",
                                         PolytopeFunctional("intrinsic", i), 20.0, rng=rng)
    vi = exact_intrinsic_volumes(pts)[i]
    assert abs(report.v_plus - (i + 1) * vi ** 2) <= 1e-10


def test_proxy_matches_generic_calculus(rng):
    body = ConvexBodySpec.ball(2)
    config = sample_model(body, "In", 30.0, rng)
    fn = PolytopeFunctional("intrinsic", 1)
    report = polytope_proxy_certificates(config, body, "In", fn, 30.0, rng=rng)
    generic = estimate_variance_proxies(fn.functional(body), config, body.intensity("In", 30.0),
                                        50, rng)
    assert report.v_plus == pytest.approx(generic.v_plus, rel=1e-12)
    assert generic.mu_plus <= 1e-24  # increasing functional, up to rounding


def test_interior_points_have_zero_remove_one(rng):
    pts = np.vstack([SIMPLEX3, 0.1 + 0.05 * rng.random((5, 3))])
    config = PointConfiguration(pts, 3)
    F = PolytopeFunctional("zeta").functional(ConvexBodySpec.cube(3, 4.0))
    base = F(config)
    for j in range(4, len(pts)):
        assert F.value_without(config, j) == base
    assert all(F.value_without(config, j) < base for j in range(4))


def test_empty_configuration():
    report = polytope_proxy_certificates(PointConfiguration.empty(2), ConvexBodySpec.ball(2), "In",
                                         PolytopeFunctional("zeta"), 10.0, rng=0)
    assert report.v_plus == 0.0 and report.passed


def test_strict_certificate_raises():
    # points outside K can push V_i(conv) above V_i(K)
    pts = np.array([[5.0, 0.0], [-5.0, 0.0], [0.0, 5.0]])
    with pytest.raises(CertificateError):
        polytope_proxy_certificates(PointConfiguration(pts, 2), ConvexBodySpec.ball(2), "In",
                                    PolytopeFunctional("intrinsic", 1), 10.0, rng=0)


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("gamma", [20.0, 100.0])
def test_boundary_model_certificates(d, gamma):
    summary = run_polytope_certificates(ConvexBodySpec.ball(d), "Bd",
                                        ["zeta"] + [f"V{i}" for i in range(1, d + 1)],
                                        gamma, 40, RandomStream(17, d), n_insert=8)
    assert summary.passed, summary.failures[:3]


def test_ellipsoid_and_cube_certificates():
    for body, model in [(ConvexBodySpec.ellipsoid([1.0, 0.5]), "Bd"),
                        (ConvexBodySpec.cube(3, 2.0), "In")]:
        summary = run_polytope_certificates(body, model, ["zeta", "V1", "V2"], 50.0, 20,
                                            RandomStream(5), n_insert=8)
        assert summary.passed, summary.failures[:3]


def test_four_dimensional_certificates():
    summary = run_polytope_certificates(ConvexBodySpec.ball(4), "In", ["zeta", "V3", "V4"], 15.0, 10,
                                        RandomStream(8), n_insert=4)
    assert summary.passed, summary.failures[:3]


def test_polytope_concentration_runs():
    report = run_polytope_concentration(ConvexBodySpec.ball(2), "In", "zeta", 50.0, 400,
                                        [5.0, 6.0], RandomStream(4))
    assert report.passed
    assert all(e == 0.0 for e in report.empirical)  # zeta lies in [0, 1]
