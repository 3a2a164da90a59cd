import math

import numpy as np
import pytest
from scipy import stats

from poisson_concentration.errors import ConfigurationError, DimensionError
from poisson_concentration.poisson import (
    IntensitySpec,
    Point,
    PointConfiguration,
    add_point,
    check_mecke,
    one_point_intensity,
    poisson_count,
    remove_point,
    sample_poisson,
    uniform_box_intensity,
)
from poisson_concentration.streams import RandomStream, as_generator, map_replications


def test_stream_is_reproducible():
    a = RandomStream(7, 3).generator().random(5)
    b = RandomStream(7, 3).generator().random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, RandomStream(7, 4).generator().random(5))
    assert not np.array_equal(a, RandomStream(8, 3).generator().random(5))


def test_children_are_distinct():
    s = RandomStream(1)
    draws = [c.generator().random() for c in s.children(20)]
    assert len(set(draws)) == 20


def test_map_replications_independent_of_workers():
    s = RandomStream(11, 2)

    def fn(i, gen):
        return (i, gen.normal())

    assert map_replications(fn, s, 50, workers=1) == map_replications(fn, s, 50, workers=4)


def test_stream_rejects_bad_seed():
    with pytest.raises(ValueError):
        RandomStream(-1)
    with pytest.raises(TypeError):
        as_generator("seed")


def test_configuration_is_immutable():
    c = PointConfiguration([[0.0, 1.0], [2.0, 3.0]], 2)
    c2 = add_point(c, Point([5.0, 5.0]))
    assert len(c) == 2 and len(c2) == 3
    with pytest.raises(ValueError):
        c.locations[0, 0] = 1.0
    c3 = remove_point(c2, 0)
    assert c3.same_multiset(PointConfiguration([[2.0, 3.0], [5.0, 5.0]], 2))


def test_configuration_dimension_checks():
    c = PointConfiguration.empty(3)
    with pytest.raises(DimensionError):
        add_point(c, Point([1.0, 2.0]))
    with pytest.raises(DimensionError):
        PointConfiguration([[1.0, 2.0]], 3)
    with pytest.raises(IndexError):
        remove_point(c, 0)


def test_permutation_keeps_multiset(rng):
    c = PointConfiguration(rng.random((10, 2)), 2, marks=list(range(10)))
    assert c.permuted(rng).same_multiset(c)


def test_intensity_validation():
    with pytest.raises(ConfigurationError):
        uniform_box_intensity(-1.0, [0], [1])
    with pytest.raises(ConfigurationError):
        uniform_box_intensity(float("nan"), [0], [1])


@pytest.mark.parametrize("mean", [0.3, 4.0, 29.0, 31.0, 250.0])
def test_poisson_count_distribution(mean):
    gen = np.random.default_rng(5)
    n = 20000
    draws = np.array([poisson_count(mean, gen) for _ in range(n)])
    assert abs(draws.mean() - mean) < 4 * math.sqrt(mean / n)
    assert abs(draws.var() - mean) < 6 * mean * math.sqrt(2.0 / n) + 4 * math.sqrt(mean / n)
    # chi-square on the central bins
    lo, hi = int(max(0, mean - 3 * math.sqrt(mean))), int(mean + 3 * math.sqrt(mean)) + 1
    ks = np.arange(lo, hi + 1)
    observed = np.array([np.count_nonzero(draws == k) for k in ks])
    expected = n * stats.poisson.pmf(ks, mean)
    keep = expected > 5
    chi2 = float(np.sum((observed[keep] - expected[keep]) ** 2 / expected[keep]))
    assert stats.chi2.sf(chi2, keep.sum() - 1) > 1e-4


def test_zero_intensity_gives_empty(rng):
    assert len(sample_poisson(one_point_intensity(0.0), rng)) == 0


def test_marks_are_drawn_jointly(rng):
    spec = IntensitySpec(
        rate=5.0,
        base_sampler=lambda g, n: g.random((n, 1)),
        ambient_dim=1,
        mark_sampler=lambda g, n, locs: [float(x) > 0.5 for x in locs[:, 0]],
    )
    eta = sample_poisson(spec, rng)
    for p in eta:
        assert p.mark == (p.location[0] > 0.5)


def test_mecke_count_weighted(rng):
    box = uniform_box_intensity(3.0, [0.0, 0.0], [1.0, 1.0])
    report = check_mecke(box, lambda eta, x: len(eta) * x.location[0], 4000, rng)
    # E sum |eta| x_1 = E N^2 / 2 = (3 + 9) / 2
    assert report.equal_within(3.0)
    assert abs(report.rhs - 6.0) < 4 * report.se_rhs


def test_mecke_rejects_few_reps(rng):
    with pytest.raises(ConfigurationError):
        check_mecke(one_point_intensity(1.0), lambda eta, x: 1.0, 10, rng)
