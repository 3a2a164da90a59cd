import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poisson_concentration.calculus import (
    Functional,
    add_one_diff,
    check_product_rule,
    constant_functional,
    count_functional,
    count_polynomial,
    estimate_variance_proxies,
    linear_functional,
    remove_one_diff,
)
from poisson_concentration.errors import EvaluationError
from poisson_concentration.poisson import Point, PointConfiguration, uniform_box_intensity

coords = st.floats(-5, 5, allow_nan=False)
configs = st.lists(st.tuples(coords, coords), min_size=0, max_size=8)


def _config(pts):
    return PointConfiguration(np.array(pts, dtype=float).reshape(-1, 2), 2)


def _max_norm():
    def evaluate(c):
        if len(c) == 0:
            return 0.0
        return float(np.max(np.linalg.norm(c.locations, axis=1)))
    return Functional(evaluate, "max-norm")


def test_count_differences():
    c = _config([(0, 0), (1, 1)])
    F = count_functional()
    assert add_one_diff(F, c, Point([3.0, 3.0])) == 1.0
    assert remove_one_diff(F, c, 0) == 1.0
    assert add_one_diff(constant_functional(4.0), c, Point([0.0, 0.0])) == 0.0


def test_linear_functional_differences():
    F = linear_functional(lambda x: x[:, 0] ** 2)
    c = _config([(1, 0), (2, 5)])
    assert add_one_diff(F, c, Point([3.0, 0.0])) == pytest.approx(9.0)
    assert remove_one_diff(F, c, 1) == pytest.approx(4.0)


@settings(max_examples=200, deadline=None)
@given(configs, st.tuples(coords, coords))
def test_product_rule_holds(pts, x):
    c = _config(pts)
    for F, G in [
        (count_functional(), _max_norm()),
        (count_polynomial([1.0, -2.0, 0.5]), linear_functional(lambda y: np.sin(y[:, 1]))),
    ]:
        report = check_product_rule(F, G, c, Point(x))
        assert report.passed, report


def test_fast_path_is_cross_checked():
    bad = Functional(lambda c: float(len(c)), "bad", fast_remove_one=lambda c, i: 0.0,
                     check_every=1)
    with pytest.raises(EvaluationError):
        remove_one_diff(bad, _config([(0, 0), (1, 1)]), 0)


def test_evaluation_failure_names_point():
    def boom(c):
        if len(c) > 1:
            raise RuntimeError("too many")
        return 0.0
    with pytest.raises(EvaluationError) as info:
        add_one_diff(Functional(boom, "boom"), _config([(0, 0)]), Point([1.0, 2.0]))
    assert info.value.point is not None


def test_count_variance_proxies(rng):
    box = uniform_box_intensity(4.0, [0, 0], [1, 1])
    c = _config([(0.1, 0.1), (0.5, 0.5), (0.9, 0.2)])
    vp = estimate_variance_proxies(count_functional(), c, box, 50, rng)
    # add-one is +1 everywhere, remove-one is +1 at every point
    assert vp.v_plus == 3.0
    assert vp.v_minus == 4.0
    assert vp.v_total == 7.0
    assert vp.se_total == 0.0


@settings(max_examples=50, deadline=None)
@given(configs)
def test_total_proxy_dominates(pts):
    box = uniform_box_intensity(2.0, [-5, -5], [5, 5])
    vp = estimate_variance_proxies(_max_norm(), _config(pts), box, 20, np.random.default_rng(0))
    assert vp.v_total >= vp.v_plus - 1e-12
    assert vp.v_total >= vp.v_minus - 1e-12
    assert vp.v_total == pytest.approx(vp.v_plus + vp.v_minus)
