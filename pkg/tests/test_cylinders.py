import math

import numpy as np
import pytest

from poisson_concentration.bounds import T_MIN
from poisson_concentration.cylinders import (
    BaseDistribution,
    BaseShape,
    CylinderModelSpec,
    CylinderRealization,
    HitPoints,
    Window,
    compare_bounds,
    coverage_counts,
    covered,
    cylinder_proxy_certificates,
    elementary_gap,
    random_rotation,
    run_cylinder_concentration,
    sample_cylinders,
    volume_in_window,
)
from poisson_concentration.errors import ConfigurationError
from poisson_concentration.streams import RandomStream


def _spec(d=2, k=1, gamma=1.0, rho=0.2, R=1.0, direction="uniform", base=None):
    return CylinderModelSpec(d, k, gamma, base or BaseDistribution.ball(rho), Window.ball(d, R),
                             direction)


def _disc_strip_area(c, rho, R):
    def F(u):
        u = max(-R, min(R, u))
        return u * math.sqrt(R * R - u * u) + R * R * math.asin(u / R)
    return F(c + rho) - F(c - rho)


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        _spec(d=2, k=2)
    with pytest.raises(ConfigurationError):
        _spec(gamma=-1.0)
    with pytest.raises(ConfigurationError):
        CylinderModelSpec(3, 1, 1.0, BaseDistribution.ball(0.1), Window.ball(2))
    with pytest.raises(ConfigurationError):
        BaseShape("triangle", 1.0)


def test_mixture_base_moments():
    base = BaseDistribution.mixture([BaseShape("ball", 0.1), BaseShape("square", 0.4)], [0.25, 0.75])
    assert base.volume_bound(2) == pytest.approx(0.16)
    assert base.mean_volume(2) == pytest.approx(0.25 * math.pi * 0.01 + 0.75 * 0.16)
    assert base.rho_max(2) == pytest.approx(0.2 * math.sqrt(2))


@pytest.mark.parametrize("d", [2, 3, 4])
def test_rotations_are_special_orthogonal(d, rng):
    for _ in range(50):
        q = random_rotation(rng, d)
        assert np.allclose(q.T @ q, np.eye(d), atol=1e-12)
        assert np.linalg.det(q) == pytest.approx(1.0)


def test_rotation_first_column_is_uniform(rng):
    cols = np.array([random_rotation(rng, 3)[:, 0] for _ in range(4000)])
    assert np.allclose(cols.mean(axis=0), 0.0, atol=0.05)
    assert np.allclose(cols.T @ cols / 4000, np.eye(3) / 3, atol=0.03)


@pytest.mark.parametrize("c", [0.0, 0.5, 0.9, -0.95])
def test_strip_in_disc_area(c):
    spec = _spec(rho=0.2, direction="fixed")
    real = CylinderRealization(spec, np.array([[c]]), np.eye(2)[None], np.array([0]), 1.0)
    est = volume_in_window(real, 400_000, rng=1)
    assert abs(est.value - _disc_strip_area(c, 0.2, 1.0)) < 4 * est.se


def test_full_cover_gives_window_volume():
    spec = _spec(d=3, k=0, rho=3.0, R=1.0)
    real = CylinderRealization(spec, np.zeros((1, 3)), np.eye(3)[None], np.array([0]), 1.0)
    est = volume_in_window(real, 5000, rng=0)
    assert est.value == spec.window.volume and est.se == 0.0


def test_empty_realization():
    real = sample_cylinders(_spec(gamma=0.0), 0)
    assert len(real) == 0 and volume_in_window(real, 100, rng=0).value == 0.0


@pytest.mark.parametrize("d,k", [(2, 0), (3, 0), (2, 1), (3, 1), (3, 2)])
def test_counts_match_reference(d, k, rng):
    spec = _spec(d=d, k=k, gamma=2.0, rho=0.3)
    real = sample_cylinders(spec, rng)
    real.check_invariants()
    hits = HitPoints(spec.window, 3000, rng)
    counts, owner = coverage_counts(real, hits)
    brute, _ = coverage_counts(real, hits, use_grid=False)
    assert np.array_equal(counts, brute)
    per = np.array([covered(hits.points, real, j) for j in range(len(real))]).reshape(len(real), -1)
    assert np.array_equal(counts, per.sum(axis=0))
    single = counts == 1
    assert np.all(per[owner[single], np.flatnonzero(single)])


@pytest.mark.parametrize("d,k", [(2, 0), (2, 1), (3, 1)])
def test_restriction_radius_is_enough(d, k):
    spec = _spec(d=d, k=k, gamma=3.0, rho=0.25)
    wide = spec.with_region_scale(3.0)
    hits = HitPoints(spec.window, 5000, 2)
    for seed in range(5):
        real = sample_cylinders(wide, seed)
        far = np.linalg.norm(real.centers, axis=1) > spec.region_radius
        for j in np.flatnonzero(far):
            assert not covered(hits.points, real, j).any()


def test_records_round_trip(rng):
    real = sample_cylinders(_spec(d=3, k=1, gamma=1.0), rng)
    lines = real.to_records().strip().split("\n")
    assert lines[0] == f"# cylinders d=3 k=1 n={len(real)}"
    for line, c, rot in zip(lines[1:], real.centers, real.rotations):
        fields = dict(part.split("=", 1) for part in line.split())
        assert np.array_equal(np.array(fields["center"].split(","), float), c)
        assert np.array_equal(np.array(fields["rotation"].split(","), float).reshape(3, 3), rot)
        assert fields["base"] == "ball:0.2"


@pytest.mark.parametrize("d,k", [(2, 0), (2, 1), (3, 1)])
def test_proxy_certificates(d, k):
    spec = _spec(d=d, k=k, gamma=2.0, rho=0.3)
    real = sample_cylinders(spec, 7)
    report = cylinder_proxy_certificates(real, 20000, 300, rng=8)
    assert report.passed, report.violations
    assert report.fubini_ok
    assert np.all(report.remove_one >= 0) and np.all(report.add_one >= 0)


def test_remove_one_matches_naive_difference():
    spec = _spec(d=2, k=0, gamma=4.0, rho=0.3)
    real = sample_cylinders(spec, 3)
    report = cylinder_proxy_certificates(real, 10000, 0, rng=4)
    hits = HitPoints(spec.window, 10000, np.random.default_rng(4))
    full = volume_in_window(real, hits=hits).value
    for j in range(len(real)):
        naive = full - volume_in_window(real.without(j), hits=hits).value
        assert report.remove_one[j] == pytest.approx(naive, abs=1e-12)


@pytest.mark.parametrize("d,k", [(2, 0), (2, 1), (3, 1)])
def test_mean_formula(d, k):
    spec = _spec(d=d, k=k, gamma=1.5, rho=0.25)
    vals = [volume_in_window(sample_cylinders(spec, s), 4000, rng=10_000 + s).value for s in range(300)]
    se = np.std(vals, ddof=1) / math.sqrt(len(vals))
    assert abs(np.mean(vals) - spec.mean_volume()) < 3.5 * se


def test_elementary_inequality():
    x = np.linspace(0, 100, 100_001)
    assert elementary_gap(x).min() >= -1e-12
    assert elementary_gap(0.0) == 0.0


def test_comparison_table():
    table = compare_bounds(_spec(d=2, k=1, gamma=1.0, rho=0.2, R=2.0))
    assert table.elementary_holds and table.constant_chain_holds
    assert table.comparison_never_larger
    assert table.n_asserted > 0 and T_MIN in table.t
    assert table.t[-1] == pytest.approx(table.window_volume - table.mean)
    with pytest.raises(ConfigurationError):
        compare_bounds(_spec(base=BaseDistribution.square(0.2)))


def test_cylinder_concentration():
    spec = _spec(d=2, k=1, gamma=1.0, rho=0.2, R=2.0)
    report = run_cylinder_concentration(spec, 200, [T_MIN, 5.0], RandomStream(6), n_points=2000)
    assert report.passed and report.mean_used == spec.mean_volume()
