"""Exact engine on the one-point state space.

When the state space is a single point, the Poisson process is a Poisson
random variable ``N`` with mean ``lam`` and a functional is just a sequence
``f(0), f(1), ...``. Every expectation in the inequality family becomes a
series that can be summed to machine precision after truncation, so the
inequalities can be checked with 1e-10 slack instead of Monte Carlo noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

from .errors import TruncationError
from .streams import as_generator

TAIL_TOLERANCE = 1e-12
MAX_MOMENT_ORDER = 4


@dataclass
class InequalityReport:
    """Both sides of an inequality ``lhs <= rhs`` and the slack ``rhs - lhs``."""

    name: str
    lhs: float
    rhs: float
    tolerance: float = 1e-10
    details: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return bool(self.slack >= -self.tolerance)


def default_truncation(lam: float, growth_bound: int) -> int:
    return max(60, math.ceil(lam + 12.0 * math.sqrt(lam) + 12.0 * growth_bound))


@dataclass
class DiscretePoissonModel:
    """``F = f(N)`` with ``N ~ Poisson(lam)``.

    ``growth_bound`` is the declared polynomial degree of ``|f|``; it drives the
    truncation level and the tail certificate.
    """

    lam: float
    f: Callable[[int], float]
    growth_bound: int = 1
    label: str = "f"
    truncation: Optional[int] = None

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError(f"lam must be positive and finite, got {self.lam!r}")
        if self.truncation is None:
            self.truncation = default_truncation(self.lam, self.growth_bound)
        self._cache = None

    def with_truncation(self, K: int) -> "DiscretePoissonModel":
        return DiscretePoissonModel(self.lam, self.f, self.growth_bound, self.label, K)

    def map(self, g: Callable[[float], float], label: str = "", growth_bound=None) -> "DiscretePoissonModel":
        """Model of ``g(F)`` on the same Poisson variable and truncation."""
        f = self.f
        return DiscretePoissonModel(
            self.lam, lambda k: g(f(k)),
            self.growth_bound if growth_bound is None else growth_bound,
            label or f"g({self.label})", self.truncation,
        )

    @property
    def K(self) -> int:
        return self.truncation

    def pmf(self) -> np.ndarray:
        """Poisson weights on ``0..K``."""
        k = np.arange(self.K + 1)
        return np.exp(k * math.log(self.lam) - self.lam - gammaln(k + 1))

    def values(self) -> np.ndarray:
        """``f(0), ..., f(K + 1)``; the last entry feeds add-one differences at ``K``."""
        if self._cache is None:
            self._cache = np.array([float(self.f(k)) for k in range(self.K + 2)])
        return self._cache

    def tail_bound(self, order: int = MAX_MOMENT_ORDER) -> float:
        """Upper bound on the neglected mass ``sum_{k>K} P(N=k) * C^q (k+2)^(g q + 2)``.

        ``C`` is the smallest constant with ``|f(k)| <= C (1+k)^g`` on the
        computed range; the extra degree 2 covers the ``k``-weighted
        remove-one terms raised to powers up to ``order / 2``. Ratios of
        consecutive terms are bounded by a constant below one beyond ``K``,
        so the tail is at most first term over one minus that ratio.
        """
        g = self.growth_bound
        vals = np.abs(self.values())
        ks = np.arange(self.K + 2)
        C = float(np.max(vals / (1.0 + ks) ** g)) if g > 0 else float(np.max(vals))
        C = max(C, 1.0)
        deg = g * order + 2
        k1 = self.K + 1
        ratio = self.lam / (k1 + 1) * ((k1 + 3) / (k1 + 2)) ** deg
        if ratio >= 1.0:
            return math.inf
        log_first = (k1 * math.log(self.lam) - self.lam - math.lgamma(k1 + 1)
                     + order * math.log(C) + deg * math.log(k1 + 2))
        return math.exp(log_first) / (1.0 - ratio)

    def check_truncation(self, order: int = MAX_MOMENT_ORDER) -> float:
        tail = self.tail_bound(order)
        if not tail <= TAIL_TOLERANCE:
            raise TruncationError(
                f"tail bound {tail:.3e} exceeds {TAIL_TOLERANCE:g} at K={self.K} "
                f"(lam={self.lam}, growth={self.growth_bound})"
            )
        return tail

    def expect(self, values: np.ndarray) -> float:
        """``E[h(N)]`` from ``h(0..K)``."""
        return float(np.dot(self.pmf(), values[: self.K + 1]))

    def mean(self) -> float:
        return self.expect(self.values())

    def add_one(self) -> np.ndarray:
        """``D F`` at ``N = k`` for ``k = 0..K``: ``f(k+1) - f(k)``."""
        v = self.values()
        return v[1:] - v[:-1]

    def remove_one(self) -> np.ndarray:
        """``f(k) - f(k-1)`` for ``k = 0..K`` (zero at ``k = 0``)."""
        v = self.values()[: self.K + 1]
        out = np.zeros_like(v)
        out[1:] = v[1:] - v[:-1]
        return out

    def proxies(self) -> dict[str, np.ndarray]:
        """``V+``, ``V-``, ``V`` as functions of ``k`` on ``0..K``."""
        up = self.add_one()
        down = self.remove_one()
        k = np.arange(self.K + 1)
        return {
            "plus": self.lam * np.minimum(up, 0.0) ** 2 + k * np.maximum(down, 0.0) ** 2,
            "minus": self.lam * np.maximum(up, 0.0) ** 2 + k * np.minimum(down, 0.0) ** 2,
            "total": self.lam * up ** 2 + k * down ** 2,
        }

    def sample(self, rng, size=None):
        gen = as_generator(rng)
        n = gen.poisson(self.lam, size=size)
        if size is None:
            return float(self.f(int(n)))
        return np.array([float(self.f(int(j))) for j in np.ravel(n)]).reshape(n.shape)


def v_plus_exact(increment: Callable[[int], Fraction], lam, k: int):
    """``V+`` at ``N = k`` from exact increments ``increment(j) = f(j) - f(j-1)``.

    Works with any number type; with ``Fraction`` increments and a rational
    ``lam`` the result is exact.
    """
    up = increment(k + 1)
    down = increment(k) if k >= 1 else 0
    return lam * min(up, 0) ** 2 + k * max(down, 0) ** 2


def v_minus_exact(increment: Callable[[int], Fraction], lam, k: int):
    up = increment(k + 1)
    down = increment(k) if k >= 1 else 0
    return lam * max(up, 0) ** 2 + k * min(down, 0) ** 2


# Battery of test sequences.

def identity(k: int) -> float:
    return float(k)


def capped(k: int, cap: int = 10) -> float:
    return float(min(k, cap))


def harmonic(k: int) -> float:
    """``sum_{j<=k} 1/j``."""
    return math.fsum(1.0 / j for j in range(1, k + 1))


def harmonic_increment(k: int) -> Fraction:
    return Fraction(1, k) if k >= 1 else Fraction(0)


def integer_fifth_root(k: int) -> int:
    m = int(round(k ** 0.2))
    while m ** 5 > k:
        m -= 1
    while (m + 1) ** 5 <= k:
        m += 1
    return m


def staircase(k: int) -> float:
    """Bounded sequence jumping by ``1/m^2`` exactly at ``k = m^5``."""
    return math.fsum(1.0 / m ** 2 for m in range(1, integer_fifth_root(k) + 1))


def staircase_increment(k: int) -> Fraction:
    if k < 1:
        return Fraction(0)
    m = integer_fifth_root(k)
    return Fraction(1, m * m) if m ** 5 == k else Fraction(0)


def sqrt_shift(k: int) -> float:
    return math.sqrt(k + 1.0)


def exp_decay_plus_one(k: int) -> float:
    return math.exp(-k) + 1.0


def exp_decay(k: int) -> float:
    return math.exp(-k)


def shift_one(k: int) -> float:
    return k + 1.0


# name -> (sequence, declared growth degree)
BATTERY: dict[str, tuple[Callable[[int], float], int]] = {
    "k": (identity, 1),
    "min(k,10)": (capped, 0),
    "harmonic": (harmonic, 1),
    "sqrt(k+1)": (sqrt_shift, 1),
    "exp(-k)+1": (exp_decay_plus_one, 0),
}

EXTRA: dict[str, tuple[Callable[[int], float], int]] = {
    "k+1": (shift_one, 1),
    "exp(-k)": (exp_decay, 0),
    "staircase": (staircase, 0),
    "constant": (lambda k: 3.0, 0),
}


def model(name: str, lam: float, truncation: Optional[int] = None) -> DiscretePoissonModel:
    """Model for a named battery sequence."""
    table = {**BATTERY, **EXTRA}
    f, g = table[name]
    return DiscretePoissonModel(lam, f, g, name, truncation)
