"""Add-one / remove-one difference operators and the variance proxies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import EvaluationError
from .poisson import IntensitySpec, Point, PointConfiguration, add_point, remove_point
from .streams import as_generator


def neg_part(x):
    """``min(0, x)``; squared terms use ``neg_part(x) ** 2``."""
    return np.minimum(0.0, x)


def pos_part(x):
    return np.maximum(0.0, x)


@dataclass
class Functional:
    """A deterministic, permutation-invariant map from configurations to reals.

    ``fast_remove_one(config, index)`` may return ``f(config - delta_x)``
    incrementally. Every ``check_every``-th fast call is compared with the naive
    path and a mismatch beyond ``1e-12`` relative raises.
    """

    evaluate: Callable[[PointConfiguration], float]
    label: str = "F"
    fast_remove_one: Optional[Callable[[PointConfiguration, int], float]] = None
    check_every: int = 100
    _fast_calls: int = field(default=0, repr=False, compare=False)

    def __call__(self, config: PointConfiguration) -> float:
        return self.evaluate(config)

    def value_without(self, config: PointConfiguration, index: int) -> float:
        if self.fast_remove_one is None:
            return self.evaluate(remove_point(config, index))
        value = self.fast_remove_one(config, index)
        self._fast_calls += 1
        if self.check_every and self._fast_calls % self.check_every == 0:
            naive = self.evaluate(remove_point(config, index))
            if abs(value - naive) > 1e-12 * max(1.0, abs(naive)):
                raise EvaluationError(
                    f"{self.label}: fast remove-one {value!r} disagrees with naive {naive!r}",
                    point=config[index],
                )
        return value


def _safe_eval(F: Functional, config: PointConfiguration, point=None) -> float:
    try:
        return float(F.evaluate(config))
    except EvaluationError:
        raise
    except Exception as exc:  # noqa: BLE001 - report which perturbation failed
        raise EvaluationError(f"{F.label} failed: {exc}", point=point) from exc


def add_one_diff(F: Functional, config: PointConfiguration, x: Point) -> float:
    """``f(eta + delta_x) - f(eta)``."""
    if not isinstance(x, Point):
        x = Point(x)
    return _safe_eval(F, add_point(config, x), x) - _safe_eval(F, config)


def remove_one_diff(F: Functional, config: PointConfiguration, index: int) -> float:
    """``f(eta) - f(eta - delta_x)`` for the point at ``index``."""
    base = _safe_eval(F, config)
    try:
        without = float(F.value_without(config, index))
    except (IndexError, EvaluationError):
        raise
    except Exception as exc:  # noqa: BLE001
        raise EvaluationError(f"{F.label} failed without point {index}: {exc}",
                              point=config[index]) from exc
    return base - without


@dataclass
class IdentityReport:
    lhs: float
    rhs: float
    discrepancy: float
    passed: bool


def check_product_rule(F: Functional, G: Functional, config: PointConfiguration,
                       x: Point) -> IdentityReport:
    """Compare ``D_x(FG)`` with ``(D_x F) G + F (D_x G) + (D_x F)(D_x G)``."""
    if not isinstance(x, Point):
        x = Point(x)
    plus = add_point(config, x)
    f0, f1 = _safe_eval(F, config), _safe_eval(F, plus, x)
    g0, g1 = _safe_eval(G, config), _safe_eval(G, plus, x)
    lhs = f1 * g1 - f0 * g0
    df, dg = f1 - f0, g1 - g0
    rhs = df * g0 + f0 * dg + df * dg
    gap = abs(lhs - rhs)
    return IdentityReport(lhs, rhs, gap, gap <= 1e-10 * (1.0 + abs(lhs) + abs(rhs)))


@dataclass
class VarianceProxies:
    """Estimates of ``V+``, ``V-`` and ``V`` for one configuration.

    The configuration sums are exact; only the intensity integrals are Monte
    Carlo, so the standard errors come from those alone.
    """

    v_plus: float
    v_minus: float
    v_total: float
    se_plus: float
    se_minus: float
    se_total: float
    n_mu_samples: int
    eta_plus: float = 0.0
    eta_minus: float = 0.0
    eta_total: float = 0.0
    mu_plus: float = 0.0
    mu_minus: float = 0.0
    mu_total: float = 0.0


def remove_one_diffs(F: Functional, config: PointConfiguration) -> np.ndarray:
    return np.array([remove_one_diff(F, config, j) for j in range(len(config))], dtype=float)


def estimate_variance_proxies(
    F: Functional,
    config: PointConfiguration,
    intensity: IntensitySpec,
    n_mu_samples: int,
    rng,
) -> VarianceProxies:
    """Variance proxies at a fixed configuration.

    Configuration terms: sums of squared clipped remove-one differences.
    Intensity terms: total mass times the sample mean of squared clipped
    add-one differences at ``n_mu_samples`` base draws, shared by all three
    proxies so that ``V >= V+`` and ``V >= V-`` hold sample by sample.
    """
    if n_mu_samples < 1:
        raise ValueError("n_mu_samples must be >= 1")
    gen = as_generator(rng)

    removed = remove_one_diffs(F, config)
    eta_plus = float(np.sum(pos_part(removed) ** 2))
    eta_minus = float(np.sum(neg_part(removed) ** 2))
    eta_total = float(np.sum(removed ** 2))

    mass = intensity.total_mass
    if mass > 0:
        draws = intensity.draw(gen, n_mu_samples)
        base = _safe_eval(F, config)
        added = np.array(
            [_safe_eval(F, add_point(config, p), p) - base for p in draws.points]
        )
    else:
        added = np.zeros(n_mu_samples)

    def mc(values):
        mean = mass * float(values.mean())
        se = mass * float(values.std(ddof=1)) / math.sqrt(n_mu_samples) if n_mu_samples > 1 else 0.0
        return mean, se

    mu_plus, se_plus = mc(neg_part(added) ** 2)
    mu_minus, se_minus = mc(pos_part(added) ** 2)
    mu_total, se_total = mc(added ** 2)
    return VarianceProxies(
        v_plus=mu_plus + eta_plus,
        v_minus=mu_minus + eta_minus,
        v_total=mu_total + eta_total,
        se_plus=se_plus,
        se_minus=se_minus,
        se_total=se_total,
        n_mu_samples=n_mu_samples,
        eta_plus=eta_plus,
        eta_minus=eta_minus,
        eta_total=eta_total,
        mu_plus=mu_plus,
        mu_minus=mu_minus,
        mu_total=mu_total,
    )


# A few simple functionals used throughout the tests and experiments.

def count_functional() -> Functional:
    return Functional(lambda c: float(len(c)), "count",
                      fast_remove_one=lambda c, i: float(len(c) - 1))


def constant_functional(value: float = 1.0) -> Functional:
    return Functional(lambda c: float(value), f"constant({value})")


def linear_functional(g: Callable[[np.ndarray], np.ndarray], label: str = "linear") -> Functional:
    """``F = sum_{x in eta} g(x)`` for a vectorised ``g``."""
    def evaluate(c):
        if len(c) == 0:
            return 0.0
        return float(np.sum(g(c.locations)))

    return Functional(evaluate, label)


def count_polynomial(coeffs) -> Functional:
    """``F = sum_j coeffs[j] * eta(X)**j``."""
    coeffs = [float(a) for a in coeffs]

    def evaluate(c):
        n = float(len(c))
        return sum(a * n ** j for j, a in enumerate(coeffs))

    return Functional(evaluate, f"poly{coeffs}")
