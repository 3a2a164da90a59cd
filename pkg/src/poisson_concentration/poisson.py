"""Poisson processes on finite-mass marked spaces and the configuration algebra."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Iterator, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DimensionError
from .streams import as_generator

# Below this mean the count is drawn by sequential inversion.
INVERSION_MAX_MEAN = 30.0


@dataclass(frozen=True)
class Point:
    location: np.ndarray
    mark: Any = None

    def __post_init__(self):
        loc = np.array(self.location, dtype=float).reshape(-1)
        loc.setflags(write=False)
        object.__setattr__(self, "location", loc)

    @property
    def dim(self) -> int:
        return self.location.shape[0]


class PointConfiguration:
    """Finite multiset of (optionally marked) points in a fixed ambient dimension.

    Instances are immutable; ``add_point``/``remove_point`` return new
    configurations. Locations are kept as one ``(n, d)`` array so geometric
    functionals can work on them directly.
    """

    __slots__ = ("_locations", "_marks", "ambient_dim")

    def __init__(self, locations, ambient_dim: int, marks: Optional[Sequence[Any]] = None):
        if int(ambient_dim) < 1:
            raise ConfigurationError("ambient_dim must be a positive integer", field="ambient_dim")
        locs = np.array(locations, dtype=float)
        if locs.size == 0:
            locs = np.empty((0, int(ambient_dim)))
        locs = locs.reshape(-1, locs.shape[-1]) if locs.ndim != 2 else locs
        if locs.shape[1] != ambient_dim:
            raise DimensionError(
                f"point locations have length {locs.shape[1]}, expected {ambient_dim}"
            )
        locs.setflags(write=False)
        if marks is None:
            marks = (None,) * locs.shape[0]
        marks = tuple(marks)
        if len(marks) != locs.shape[0]:
            raise ConfigurationError("marks and locations differ in length", field="marks")
        self._locations = locs
        self._marks = marks
        self.ambient_dim = int(ambient_dim)

    @classmethod
    def empty(cls, ambient_dim: int) -> "PointConfiguration":
        return cls(np.empty((0, ambient_dim)), ambient_dim)

    @classmethod
    def from_points(cls, points: Sequence[Point], ambient_dim: int) -> "PointConfiguration":
        for p in points:
            if p.dim != ambient_dim:
                raise DimensionError(f"point has dimension {p.dim}, expected {ambient_dim}")
        locs = np.array([p.location for p in points]).reshape(len(points), ambient_dim)
        return cls(locs, ambient_dim, [p.mark for p in points])

    @property
    def locations(self) -> np.ndarray:
        return self._locations

    @property
    def marks(self) -> tuple:
        return self._marks

    @property
    def points(self) -> list[Point]:
        return [Point(loc, m) for loc, m in zip(self._locations, self._marks)]

    def __len__(self) -> int:
        return self._locations.shape[0]

    def __iter__(self) -> Iterator[Point]:
        return iter(self.points)

    def __getitem__(self, index: int) -> Point:
        return Point(self._locations[index], self._marks[index])

    def __repr__(self) -> str:
        return f"PointConfiguration(n={len(self)}, ambient_dim={self.ambient_dim})"

    def permuted(self, rng) -> "PointConfiguration":
        order = as_generator(rng).permutation(len(self))
        return PointConfiguration(
            self._locations[order], self.ambient_dim, [self._marks[i] for i in order]
        )

    def same_multiset(self, other: "PointConfiguration") -> bool:
        """Multiset equality of locations (marks compared with ``==``)."""
        if self.ambient_dim != other.ambient_dim or len(self) != len(other):
            return False
        a = sorted(zip(map(tuple, self._locations), map(repr, self._marks)))
        b = sorted(zip(map(tuple, other._locations), map(repr, other._marks)))
        return a == b

    def count_in(self, indicator: Callable[[np.ndarray], np.ndarray]) -> int:
        """Number of points whose location satisfies a vectorised indicator."""
        if len(self) == 0:
            return 0
        return int(np.count_nonzero(indicator(self._locations)))


def add_point(config: PointConfiguration, x: Point) -> PointConfiguration:
    """Configuration with one more copy of ``x``; the input is left unchanged."""
    if not isinstance(x, Point):
        x = Point(x)
    if x.dim != config.ambient_dim:
        raise DimensionError(f"point has dimension {x.dim}, expected {config.ambient_dim}")
    locs = np.vstack([config.locations, x.location[None, :]])
    return PointConfiguration(locs, config.ambient_dim, config.marks + (x.mark,))


def remove_point(config: PointConfiguration, index: int) -> PointConfiguration:
    """Configuration with the point at ``index`` removed."""
    n = len(config)
    if not isinstance(index, (int, np.integer)) or not 0 <= index < n:
        raise IndexError(f"index {index} out of range for configuration of size {n}")
    locs = np.delete(config.locations, index, axis=0)
    marks = config.marks[:index] + config.marks[index + 1:]
    return PointConfiguration(locs, config.ambient_dim, marks)


@dataclass(frozen=True)
class IntensitySpec:
    """Finite intensity measure ``rate * total_base_mass * (normalised base)``.

    ``base_sampler(rng, n)`` returns an ``(n, ambient_dim)`` array of
    independent draws from the normalised base measure; ``mark_sampler``, if
    given, returns ``n`` marks drawn jointly with them (it receives the
    locations as a third argument).
    """

    rate: float
    base_sampler: Callable[[np.random.Generator, int], np.ndarray]
    ambient_dim: int
    total_base_mass: float = 1.0
    description: str = ""
    mark_sampler: Optional[Callable[[np.random.Generator, int, np.ndarray], Sequence[Any]]] = None

    def __post_init__(self):
        for name in ("rate", "total_base_mass"):
            value = getattr(self, name)
            if not isinstance(value, (int, float, np.floating, np.integer)) or not math.isfinite(value):
                raise ConfigurationError(f"{name} must be a finite real, got {value!r}", field=name)
            if value < 0:
                raise ConfigurationError(f"{name} must be non-negative, got {value!r}", field=name)

    @property
    def total_mass(self) -> float:
        return float(self.rate) * float(self.total_base_mass)

    def draw(self, rng: np.random.Generator, n: int) -> PointConfiguration:
        """``n`` i.i.d. points from the normalised base measure."""
        if n == 0:
            return PointConfiguration.empty(self.ambient_dim)
        locs = np.asarray(self.base_sampler(rng, n), dtype=float).reshape(n, self.ambient_dim)
        marks = None
        if self.mark_sampler is not None:
            marks = list(self.mark_sampler(rng, n, locs))
        return PointConfiguration(locs, self.ambient_dim, marks)


def _poisson_inversion(mean: float, rng: np.random.Generator) -> int:
    u = rng.random()
    k = 0
    p = math.exp(-mean)
    cdf = p
    while u > cdf:
        k += 1
        p *= mean / k
        cdf += p
        if p == 0.0 and cdf < u:
            # u landed in the float-rounding gap at the far tail
            break
    return k


def _poisson_ptrs(mean: float, rng: np.random.Generator) -> int:
    """Hörmann's transformed rejection with squeeze; needs mean >= 10."""
    slam = math.sqrt(mean)
    loglam = math.log(mean)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u = rng.random() - 0.5
        v = rng.random()
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + mean + 0.43)
        if us >= 0.07 and v <= vr:
            return int(k)
        if k < 0 or (us < 0.013 and v > us):
            continue
        lhs = math.log(v) + math.log(inv_alpha) - math.log(a / (us * us) + b)
        if lhs <= -mean + k * loglam - math.lgamma(k + 1):
            return int(k)


def poisson_count(mean: float, rng: np.random.Generator) -> int:
    """One Poisson(mean) variate: inversion for small means, PTRS above."""
    if not math.isfinite(mean) or mean < 0:
        raise ConfigurationError(f"Poisson mean must be finite and non-negative, got {mean!r}")
    if mean == 0.0:
        return 0
    if mean <= INVERSION_MAX_MEAN:
        return _poisson_inversion(mean, rng)
    return _poisson_ptrs(mean, rng)


def sample_poisson(intensity: IntensitySpec, rng) -> PointConfiguration:
    """Realisation of the Poisson process with the given finite intensity."""
    gen = as_generator(rng)
    n = poisson_count(intensity.total_mass, gen)
    return intensity.draw(gen, n)


@dataclass
class MeckeReport:
    lhs: float
    rhs: float
    se_lhs: float
    se_rhs: float
    se_diff: float
    n_reps: int

    @property
    def discrepancy(self) -> float:
        return self.lhs - self.rhs

    def equal_within(self, k_sigma: float = 3.0) -> bool:
        if self.se_diff == 0.0:
            return self.lhs == self.rhs
        return abs(self.discrepancy) <= k_sigma * self.se_diff


def check_mecke(
    intensity: IntensitySpec,
    g: Callable[[PointConfiguration, Point], float],
    n_reps: int,
    rng,
) -> MeckeReport:
    """Monte Carlo estimates of both sides of the Mecke identity.

    Left: ``E sum_{x in eta} g(eta, x)``. Right: ``Lambda * E g(eta + delta_X, X)``
    with ``X`` drawn from the normalised base measure. Both sides use the same
    realisation per replication; ``se_diff`` is the standard error of the paired
    difference.
    """
    if n_reps < 100:
        raise ConfigurationError("check_mecke needs n_reps >= 100", field="n_reps")
    gen = as_generator(rng)
    mass = intensity.total_mass
    left = np.empty(n_reps)
    right = np.empty(n_reps)
    for r in range(n_reps):
        eta = sample_poisson(intensity, gen)
        left[r] = sum(g(eta, p) for p in eta.points)
        if mass > 0:
            x = intensity.draw(gen, 1)[0]
            right[r] = mass * g(add_point(eta, x), x)
        else:
            right[r] = 0.0
    root_n = math.sqrt(n_reps)
    return MeckeReport(
        lhs=float(left.mean()),
        rhs=float(right.mean()),
        se_lhs=float(left.std(ddof=1) / root_n),
        se_rhs=float(right.std(ddof=1) / root_n),
        se_diff=float((left - right).std(ddof=1) / root_n),
        n_reps=n_reps,
    )


def uniform_box_sampler(low, high) -> Callable[[np.random.Generator, int], np.ndarray]:
    low = np.asarray(low, dtype=float)
    high = np.asarray(high, dtype=float)

    def sampler(rng, n):
        return rng.uniform(low, high, size=(n, low.shape[0]))

    return sampler


def uniform_box_intensity(rate: float, low, high, description: str = "") -> IntensitySpec:
    """Rate ``rate`` times the uniform probability measure on a box."""
    low = np.asarray(low, dtype=float)
    return IntensitySpec(
        rate=rate,
        base_sampler=uniform_box_sampler(low, high),
        ambient_dim=low.shape[0],
        total_base_mass=1.0,
        description=description or f"uniform on box {list(low)}..{list(high)}",
    )


def one_point_intensity(rate: float) -> IntensitySpec:
    """The one-point space: every point sits at the origin of the real line."""
    return IntensitySpec(
        rate=rate,
        base_sampler=lambda rng, n: np.zeros((n, 1)),
        ambient_dim=1,
        description="one-point space",
    )
