"""Functionals of Poisson polytopes and their variance-proxy certificates.

``F = zeta(conv(eta))`` with ``zeta`` normalised Lebesgue measure on the body,
or ``F = V_i(conv(eta))``. Both are increasing under inclusion, so add-one
differences are non-negative and only hull vertices have non-zero
remove-one differences.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..bounds import BoundSpec, TailReport, verify_tail
from ..calculus import Functional
from ..errors import CertificateError, ConfigurationError
from ..poisson import PointConfiguration
from ..streams import RandomStream, as_generator, map_replications
from .bodies import ConvexBodySpec, sample_model
from .hull import SimplicialHull, affine_dimension
from .intrinsic import exact_intrinsic_volumes, intrinsic_volume

BOUND_RTOL = 1e-9
DEFAULT_ANGLE_SAMPLES = 4000


@dataclass
class ContentEstimate:
    value: float
    se: float = 0.0

    def __iter__(self):
        return iter((self.value, self.se))


def _seed_from_points(points: np.ndarray) -> int:
    """Deterministic seed from the multiset of points (row order ignored)."""
    rows = np.ascontiguousarray(points[np.lexsort(points.T[::-1])]) if points.size else points
    return int.from_bytes(hashlib.blake2b(rows.tobytes(), digest_size=8).digest(), "little")


def polytope_profile(points, dim: int, n_angle_samples: int = DEFAULT_ANGLE_SAMPLES,
                     seed: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
    """``[V_0, ..., V_d]`` of ``conv(points)`` and their standard errors.

    Exact whenever the hull has affine dimension at most 3. Higher-dimensional
    hulls sample the external angles of faces of codimension 3 or more; the
    sampling seed is derived from the points themselves unless given, so the
    value is a deterministic function of the configuration.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, dim)
    if pts.shape[0] == 0:
        return np.zeros(dim + 1), np.zeros(dim + 1)
    if pts.shape[0] <= 4 or affine_dimension(pts) <= 3:
        return exact_intrinsic_volumes(pts, dim), np.zeros(dim + 1)
    # canonical row order, so that faces meet the angle samples in the same order
    pts = pts[np.lexsort(pts.T[::-1])]
    hull = SimplicialHull(pts, dim)
    rng = np.random.default_rng(_seed_from_points(pts) if seed is None else seed)
    vals, ses = np.zeros(dim + 1), np.zeros(dim + 1)
    for i in range(dim + 1):
        vals[i], ses[i] = intrinsic_volume(hull, i, n_angle_samples, rng)
    return vals, ses


def zeta_content(hull_or_points, body: ConvexBodySpec, method: str = "exact",
                 n_samples: int = 10_000, rng=None) -> ContentEstimate:
    """Normalised Lebesgue measure of ``conv(points)`` inside ``body``.

    ``exact``: hull volume over body volume (0 for lower-dimensional hulls).
    ``mc``: fraction of ``n_samples`` uniform body points that fall in the
    hull, with binomial SE.
    """
    hull = hull_or_points if isinstance(hull_or_points, SimplicialHull) \
        else SimplicialHull(np.asarray(hull_or_points, dtype=float).reshape(-1, body.dim), body.dim)
    if method == "exact":
        if not hull.is_full_dimensional:
            return ContentEstimate(0.0)
        return ContentEstimate(hull.volume / body.volume)
    if method == "mc":
        if not hull.is_full_dimensional:
            return ContentEstimate(0.0)
        gen = as_generator(rng)
        inside = hull.contains(body.sample_interior(gen, n_samples), tol=0.0)
        p = float(inside.mean())
        return ContentEstimate(p, math.sqrt(p * (1 - p) / n_samples))
    raise ValueError(f"method must be 'exact' or 'mc', got {method!r}")


@dataclass(frozen=True)
class PolytopeFunctional:
    """``zeta`` (normalised volume) or ``V_i`` of the hull."""

    kind: str
    i: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("zeta", "intrinsic"):
            raise ConfigurationError(f"functional must be zeta or intrinsic, got {self.kind!r}",
                                     field="functional")
        if self.kind == "intrinsic" and (self.i is None or self.i < 0):
            raise ConfigurationError("intrinsic functional needs an order i >= 0", field="i")

    @classmethod
    def parse(cls, text: str) -> "PolytopeFunctional":
        """``"zeta"`` or ``"V<i>"`` / ``"V_<i>"``."""
        t = str(text).strip()
        if t == "zeta":
            return cls("zeta")
        if t[:1] == "V" and t.lstrip("V_").isdigit():
            return cls("intrinsic", int(t.lstrip("V_")))
        raise ConfigurationError(f"unknown polytope functional {text!r}", field="functional")

    @property
    def label(self) -> str:
        return "zeta" if self.kind == "zeta" else f"V{self.i}"

    def check_body(self, body: ConvexBodySpec):
        if self.kind == "intrinsic" and self.i > body.dim:
            raise ConfigurationError(f"order {self.i} exceeds dimension {body.dim}", field="i")

    def from_profile(self, profile: np.ndarray, body: ConvexBodySpec) -> np.ndarray:
        """Functional values from rows of intrinsic-volume profiles."""
        if self.kind == "zeta":
            return profile[..., body.dim] / body.volume
        return profile[..., self.i]

    def body_value(self, body: ConvexBodySpec) -> float:
        """``zeta(K) = 1`` or ``V_i(K)``, the largest value the functional can take."""
        return 1.0 if self.kind == "zeta" else body.intrinsic_volume(self.i)

    def bound_plus(self, body: ConvexBodySpec) -> float:
        """Almost-sure bound on ``V+``: ``d + 1`` or ``(i + 1) V_i(K)^2``."""
        if self.kind == "zeta":
            return float(body.dim + 1)
        return (self.i + 1) * self.body_value(body) ** 2

    def bound_minus(self, body: ConvexBodySpec, gamma: float) -> float:
        """Almost-sure bound on ``V-``: ``gamma`` or ``gamma V_i(K)^2``."""
        return gamma * self.body_value(body) ** 2

    def functional(self, body: ConvexBodySpec) -> Functional:
        """As a :class:`~poisson_concentration.calculus.Functional` with a fast remove-one path."""
        self.check_body(body)
        d = body.dim
        cache: dict[bytes, tuple[float, frozenset]] = {}

        def value_and_vertices(config: PointConfiguration):
            locs = config.locations
            key = locs.tobytes()
            if key not in cache:
                profile, _ = polytope_profile(locs, d)
                verts = frozenset(_vertex_indices(locs, d))
                cache.clear()
                cache[key] = (float(self.from_profile(profile, body)), verts)
            return cache[key]

        def evaluate(config):
            return value_and_vertices(config)[0]

        def fast_remove_one(config, index):
            if not 0 <= index < len(config):
                raise IndexError(index)
            value, verts = value_and_vertices(config)
            if index not in verts:
                return value
            locs = np.delete(config.locations, index, axis=0)
            profile, _ = polytope_profile(locs, d)
            return float(self.from_profile(profile, body))

        return Functional(evaluate, self.label, fast_remove_one=fast_remove_one)


def _vertex_indices(points: np.ndarray, dim: int) -> list[int]:
    """Indices of points that are vertices of their hull (all of them if there are few)."""
    if points.shape[0] == 0:
        return []
    if points.shape[0] <= dim + 1:
        return list(range(points.shape[0]))
    hull = SimplicialHull(points, dim)
    verts = set(int(v) for v in hull.vertices)
    if hull.dim_actual < 1:
        # coincident points: removing one of them never changes the hull
        return []
    return sorted(verts)


@dataclass
class CertificateReport:
    """Proxy bounds checked on one configuration.

    ``v_plus`` is exact up to angle sampling. It equals the configuration sum
    of squared remove-one differences, because add-one differences of an
    increasing functional have no negative part. ``v_minus`` is the Monte
    Carlo intensity term.
    """

    label: str
    n_points: int
    v_plus: float
    bound_plus: float
    v_minus: float
    v_minus_se: float
    bound_minus: float
    remove_one: np.ndarray = field(repr=False)
    add_one: np.ndarray = field(repr=False)
    value: float = 0.0
    body_value: float = 0.0
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def ratio_plus(self) -> float:
        return self.v_plus / self.bound_plus if self.bound_plus > 0 else 0.0


def _remove_one_profiles(points: np.ndarray, dim: int, which: Sequence[int]) -> np.ndarray:
    return np.array([polytope_profile(np.delete(points, j, axis=0), dim)[0] for j in which])


def polytope_proxy_certificates(
    config: PointConfiguration,
    body: ConvexBodySpec,
    model: str,
    functional,
    gamma: float,
    n_insert: int = 64,
    rng=None,
    strict: bool = True,
) -> CertificateReport:
    """Check the almost-sure proxy bounds for one configuration.

    ``V+`` is computed exactly by recomputing the hull without each vertex
    (other points contribute 0). Add-one differences are evaluated at
    ``n_insert`` points drawn from the model's intensity. The checks:
    ``V+ <= d + 1`` (zeta) or ``(i + 1) V_i(K)^2``, every add-one difference
    ``>= 0`` and at most ``zeta(K)`` or ``V_i(K)``, the resulting ``V-``
    estimate within its bound, and ``V_i(conv) <= V_i(K)``. With ``strict``
    any violation raises :class:`CertificateError`.
    """
    report = certify_functionals(config, body, model, [functional], gamma, n_insert, rng)[0]
    if strict and report.violations:
        raise CertificateError(f"{report.label} on {body.kind} ({model}, gamma={gamma}): "
                               + "; ".join(report.violations))
    return report


def certify_functionals(config: PointConfiguration, body: ConvexBodySpec, model: str,
                        functionals: Sequence, gamma: float, n_insert: int = 64,
                        rng=None) -> list[CertificateReport]:
    """Non-raising certificates for several functionals sharing one set of hulls."""
    fns = [f if isinstance(f, PolytopeFunctional) else PolytopeFunctional.parse(f) for f in functionals]
    for fn in fns:
        fn.check_body(body)
    d = body.dim
    pts = config.locations
    exact = d <= 3
    base_profile, base_se = polytope_profile(pts, d)
    verts = _vertex_indices(pts, d)
    removed_rows = _remove_one_profiles(pts, d, verts) if verts else np.empty((0, d + 1))

    gen = as_generator(rng)
    intensity = body.intensity(model, gamma)
    mass = intensity.total_mass
    added_rows = np.empty((0, d + 1))
    if n_insert and mass > 0:
        new = intensity.draw(gen, n_insert).locations
        added_rows = np.array([polytope_profile(np.vstack([pts, x[None, :]]), d)[0] for x in new])

    reports = []
    for fn in fns:
        value = float(fn.from_profile(base_profile, body))
        value_se = float(fn.from_profile(base_se, body))
        removed = np.zeros(len(pts))
        if verts:
            removed[verts] = value - fn.from_profile(removed_rows, body)
        v_plus = float(np.sum(np.maximum(removed, 0.0) ** 2))
        added = fn.from_profile(added_rows, body) - value if len(added_rows) else np.zeros(0)
        sq = np.maximum(added, 0.0) ** 2
        v_minus = mass * float(sq.mean()) if added.size else 0.0
        v_minus_se = mass * float(sq.std(ddof=1)) / math.sqrt(added.size) if added.size > 1 else 0.0
        v_minus += float(np.sum(np.minimum(removed, 0.0) ** 2))

        if fn.kind == "zeta":
            body_val, b_plus = 1.0, fn.bound_plus(body)
        else:
            # upper 3 SE limit when V_i(K) is itself estimated
            v_k, v_k_se = body.intrinsic_volume_estimate(fn.i)
            body_val = v_k + 3.0 * v_k_se
            b_plus = (fn.i + 1) * body_val ** 2
        b_minus = gamma * body_val ** 2
        # rounding allowance on exact paths; 6 SE per difference under angle sampling
        diff_tol = 1e-10 * max(1.0, body_val) if exact else 1e-10 + 6.0 * value_se
        plus_tol = 0.0 if exact else len(verts) * diff_tol ** 2 + 2 * diff_tol * float(np.abs(removed).sum())

        violations = []
        if v_plus > b_plus * (1 + BOUND_RTOL) + plus_tol:
            violations.append(f"V+ = {v_plus!r} exceeds {b_plus!r}")
        if v_minus > b_minus * (1 + BOUND_RTOL) + 3 * v_minus_se:
            violations.append(f"V- = {v_minus!r} exceeds {b_minus!r}")
        if added.size and added.min() < -diff_tol:
            violations.append(f"add-one difference {added.min()!r} < 0")
        if added.size and added.max() > body_val + diff_tol:
            violations.append(f"add-one difference {added.max()!r} exceeds {body_val!r}")
        if value > body_val + diff_tol:
            violations.append(f"F = {value!r} exceeds its value on K {body_val!r}")
        reports.append(CertificateReport(fn.label, len(pts), v_plus, b_plus, v_minus, v_minus_se,
                                         b_minus, removed, added, value, body_val, violations))
    return reports


@dataclass
class CertificateSummary:
    """Certificates over many replications for several functionals at once."""

    labels: list
    n_reps: int
    n_passed: dict
    max_ratio_plus: dict
    max_ratio_minus: dict
    mean_value: dict
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.n_passed[k] == self.n_reps for k in self.labels)


def run_polytope_certificates(
    body: ConvexBodySpec,
    model: str,
    functionals: Sequence,
    gamma: float,
    n_reps: int,
    rng,
    n_insert: int = 16,
    workers: int = 1,
) -> CertificateSummary:
    """Certificates on ``n_reps`` independent configurations.

    Each replication samples one configuration and checks every functional
    on it, sharing the remove-one hulls. Violations are collected rather than
    raised so that the summary can report them all.
    """
    fns = [f if isinstance(f, PolytopeFunctional) else PolytopeFunctional.parse(f) for f in functionals]
    stream = rng if isinstance(rng, RandomStream) else RandomStream(int(as_generator(rng).integers(2 ** 63)))

    def one(i, gen):
        config = sample_model(body, model, gamma, gen)
        return certify_functionals(config, body, model, fns, gamma, n_insert, gen)

    reports = map_replications(one, stream, n_reps, workers)
    labels = [f.label for f in fns]
    summary = CertificateSummary(labels, n_reps, {}, {}, {}, {})
    for k, label in enumerate(labels):
        col = [r[k] for r in reports]
        summary.n_passed[label] = sum(r.passed for r in col)
        summary.max_ratio_plus[label] = max((r.ratio_plus for r in col), default=0.0)
        summary.max_ratio_minus[label] = max(
            (r.v_minus / r.bound_minus for r in col if r.bound_minus > 0), default=0.0)
        summary.mean_value[label] = float(np.mean([r.value for r in col])) if col else 0.0
        summary.failures.extend((i, label, v) for i, r in enumerate(col) for v in r.violations)
    return summary


def polytope_bound_spec(body: ConvexBodySpec, functional, gamma: float, tail: str = "upper_tail") -> BoundSpec:
    """Tail bound with ``L`` from the proxy bounds: ``V+`` bound for the upper tail, ``V-`` for the lower."""
    fn = functional if isinstance(functional, PolytopeFunctional) else PolytopeFunctional.parse(functional)
    fn.check_body(body)
    if tail == "upper_tail":
        scale = fn.bound_plus(body)
    elif tail == "lower_tail":
        scale = fn.bound_minus(body, gamma)
    else:
        raise ConfigurationError(f"tail must be upper_tail or lower_tail, got {tail!r}", field="tail")
    return BoundSpec(tail, scale)


def run_polytope_concentration(
    body: ConvexBodySpec,
    model: str,
    functional,
    gamma: float,
    n_reps: int,
    t_grid: Sequence[float],
    rng,
    tail: str = "upper_tail",
    mean: Optional[float] = None,
    workers: int = 1,
) -> TailReport:
    """Empirical tail of ``F`` against the proxy-driven bound."""
    fn = functional if isinstance(functional, PolytopeFunctional) else PolytopeFunctional.parse(functional)
    spec = polytope_bound_spec(body, fn, gamma, tail)

    def sampler(gen):
        config = sample_model(body, model, gamma, gen)
        profile, _ = polytope_profile(config.locations, body.dim)
        return float(fn.from_profile(profile, body))

    return verify_tail(sampler, spec, n_reps, rng, t_grid, mean=mean, workers=workers)
