"""Poisson cylinder models and the volume they cover in a window.

A cylinder is ``theta((x + K) x E_k)``: a compact base ``K`` in
``R^(d-k)`` shifted by ``x``, extended along the last ``k`` coordinate axes
and rotated by ``theta``. A point ``p`` is covered iff the first ``d - k``
coordinates of ``theta^T p`` lie in ``x + K``. With ``k = 0`` this is the
Boolean model with grains ``x + K``.

The centre process has infinite intensity on ``R^(d-k)``; only cylinders with
``|x| <= R_W + rho_max`` can meet a window inside the ball of radius ``R_W``,
so sampling is restricted to that ball. Cylinders outside it have zero
add-one and remove-one differences and do not affect any proxy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .bounds import C_ONE_SIDED, BoundSpec, T_MIN, TailReport, verify_tail
from .errors import CertificateError, ConfigurationError
from .geometry.intrinsic import unit_ball_volume
from .poisson import poisson_count
from .streams import as_generator

ORTHO_TOL = 1e-12


@dataclass(frozen=True)
class BaseShape:
    """A base ``K`` in ``R^m`` centred at the origin: ``ball`` of ``size`` radius or ``square`` of side ``size``.

    Squares are cubes in general ``m``; in ``m = 1`` both are intervals.
    """

    kind: str
    size: float

    def __post_init__(self):
        if self.kind not in ("ball", "square"):
            raise ConfigurationError(f"base kind must be ball or square, got {self.kind!r}", field="base")
        if not (self.size > 0 and math.isfinite(self.size)):
            raise ConfigurationError("base size must be positive", field="base")

    def volume(self, m: int) -> float:
        if m == 0:
            return 1.0
        if self.kind == "ball":
            return unit_ball_volume(m) * self.size ** m
        return self.size ** m

    def circumradius(self, m: int) -> float:
        return self.size if self.kind == "ball" else 0.5 * self.size * math.sqrt(m)

    def contains(self, y: np.ndarray) -> np.ndarray:
        """Membership of rows of ``y`` (already centred at the base's shift)."""
        if y.shape[1] == 0:
            return np.ones(y.shape[0], dtype=bool)
        if self.kind == "ball":
            return np.einsum("ij,ij->i", y, y) <= self.size * self.size
        return np.max(np.abs(y), axis=1) <= 0.5 * self.size


@dataclass(frozen=True)
class BaseDistribution:
    """Finite mixture of base shapes; a single shape has weight 1."""

    shapes: tuple[BaseShape, ...]
    weights: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        if len(self.shapes) == 0 or len(self.shapes) != len(self.weights):
            raise ConfigurationError("base mixture needs one weight per shape", field="base")
        if min(self.weights) < 0 or not math.isclose(sum(self.weights), 1.0, rel_tol=1e-12):
            raise ConfigurationError("base mixture weights must be non-negative and sum to 1",
                                     field="base")

    @classmethod
    def ball(cls, radius: float) -> "BaseDistribution":
        return cls((BaseShape("ball", float(radius)),))

    @classmethod
    def square(cls, side: float) -> "BaseDistribution":
        return cls((BaseShape("square", float(side)),))

    @classmethod
    def mixture(cls, shapes: Sequence[BaseShape], weights: Sequence[float]) -> "BaseDistribution":
        return cls(tuple(shapes), tuple(float(w) for w in weights))

    def volume_bound(self, m: int) -> float:
        """``A``: the largest base volume."""
        return max(s.volume(m) for s, w in zip(self.shapes, self.weights) if w > 0)

    def mean_volume(self, m: int) -> float:
        return sum(w * s.volume(m) for s, w in zip(self.shapes, self.weights))

    def rho_max(self, m: int) -> float:
        return max(s.circumradius(m) for s, w in zip(self.shapes, self.weights) if w > 0)

    def sample(self, gen: np.random.Generator, n: int) -> np.ndarray:
        """Indices of the mixture components of ``n`` independent bases."""
        if len(self.shapes) == 1:
            return np.zeros(n, dtype=int)
        return gen.choice(len(self.shapes), size=n, p=np.asarray(self.weights))


@dataclass(frozen=True)
class Window:
    """Observation window centred at the origin: ``ball`` of radius ``size`` or ``box`` with side lengths ``sides``."""

    kind: str
    dim: int
    size: float = 1.0
    sides: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.kind not in ("ball", "box"):
            raise ConfigurationError(f"window must be ball or box, got {self.kind!r}", field="window")
        if self.kind == "ball" and not (self.size > 0 and math.isfinite(self.size)):
            raise ConfigurationError("window must be bounded with positive radius", field="window")
        if self.kind == "box":
            if self.sides is None or len(self.sides) != self.dim:
                raise ConfigurationError(f"box window needs {self.dim} side lengths", field="window")
            if not all(s > 0 and math.isfinite(s) for s in self.sides):
                raise ConfigurationError("window must be bounded with positive sides", field="window")

    @classmethod
    def ball(cls, dim: int, radius: float = 1.0) -> "Window":
        return cls("ball", dim, size=float(radius))

    @classmethod
    def box(cls, sides) -> "Window":
        sides = tuple(float(s) for s in sides)
        return cls("box", len(sides), sides=sides)

    @property
    def volume(self) -> float:
        if self.kind == "ball":
            return unit_ball_volume(self.dim) * self.size ** self.dim
        return float(np.prod(self.sides))

    @property
    def diameter(self) -> float:
        return 2.0 * self.size if self.kind == "ball" else float(np.linalg.norm(self.sides))

    @property
    def circumradius(self) -> float:
        return 0.5 * self.diameter

    def sample(self, gen: np.random.Generator, n: int) -> np.ndarray:
        d = self.dim
        if self.kind == "ball":
            g = gen.standard_normal((n, d))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            return g * self.size * gen.random((n, 1)) ** (1.0 / d)
        return (gen.random((n, d)) - 0.5) * np.asarray(self.sides)

    def contains(self, points: np.ndarray) -> np.ndarray:
        if self.kind == "ball":
            return np.linalg.norm(points, axis=1) <= self.size
        return np.all(np.abs(points) <= 0.5 * np.asarray(self.sides), axis=1)


@dataclass(frozen=True)
class CylinderModelSpec:
    """Poisson cylinder model: centre rate ``gamma`` on ``R^(d-k)``, i.i.d. rotations and bases.

    ``direction`` is ``uniform`` (Gaussian QR rotations) or ``fixed`` (identity,
    cylinders parallel to the last ``k`` axes). For ``k = 0`` the rotation is
    always the identity.
    """

    d: int
    k: int
    gamma: float
    base: BaseDistribution
    window: Window
    direction: str = "uniform"

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or self.d < 1:
            raise ConfigurationError("d must be a positive integer", field="d")
        if not isinstance(self.k, (int, np.integer)) or not 0 <= self.k <= self.d - 1:
            raise ConfigurationError(f"k must lie in [0, {self.d - 1}], got {self.k!r}", field="k")
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise ConfigurationError("gamma must be a non-negative finite real", field="gamma")
        if self.window.dim != self.d:
            raise ConfigurationError("window dimension must equal d", field="window")
        if self.direction not in ("uniform", "fixed"):
            raise ConfigurationError("direction must be uniform or fixed", field="direction")

    @property
    def base_dim(self) -> int:
        return self.d - self.k

    @property
    def A(self) -> float:
        """Almost-sure bound on the base volume."""
        return self.base.volume_bound(self.base_dim)

    @property
    def rho_max(self) -> float:
        return self.base.rho_max(self.base_dim)

    @property
    def region_radius(self) -> float:
        return self.window.circumradius + self.rho_max

    @property
    def region_volume(self) -> float:
        return unit_ball_volume(self.base_dim) * self.region_radius ** self.base_dim

    @property
    def expected_count(self) -> float:
        return self.gamma * self.region_volume

    def mean_volume(self) -> float:
        """``l_d(W) (1 - exp(-gamma E l_(d-k)(Xi)))``."""
        return self.window.volume * -math.expm1(-self.gamma * self.base.mean_volume(self.base_dim))

    def bound_scales(self) -> tuple[float, float]:
        """``(L_upper, L_lower) = (A diam^k l_d(W), gamma A^2 diam^k l_d(W))``."""
        a = self.A * self.window.diameter ** self.k
        return a * self.window.volume, self.gamma * self.A * a * self.window.volume

    def with_region_scale(self, factor: float) -> "CylinderModelSpec":
        """Same model; used only to test that the restriction radius is large enough."""
        return _ScaledRegionSpec(self.d, self.k, self.gamma, self.base, self.window, self.direction,
                                 factor)


@dataclass(frozen=True)
class _ScaledRegionSpec(CylinderModelSpec):
    """Spec whose sampling radius is ``R_W + factor * rho_max``."""

    factor: float = 1.0

    @property
    def region_radius(self) -> float:
        return self.window.circumradius + self.factor * self.rho_max


def random_rotation(gen: np.random.Generator, d: int) -> np.ndarray:
    """Haar rotation in ``SO(d)`` from the QR factorisation of a Gaussian matrix."""
    q, r = np.linalg.qr(gen.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, -1] = -q[:, -1]
    return q


@dataclass
class CylinderRealization:
    """Retained cylinders: centres ``(n, d-k)``, rotations ``(n, d, d)``, base indices ``(n,)``."""

    spec: CylinderModelSpec
    centers: np.ndarray
    rotations: np.ndarray
    bases: np.ndarray
    sampling_region_mass: float

    def __post_init__(self):
        n = self.centers.shape[0]
        if self.rotations.shape != (n, self.spec.d, self.spec.d) or self.bases.shape != (n,):
            raise ValueError("centres, rotations and bases must agree in length")

    def __len__(self) -> int:
        return self.centers.shape[0]

    def check_invariants(self) -> None:
        eye = np.eye(self.spec.d)
        for rot in self.rotations:
            if np.max(np.abs(rot.T @ rot - eye)) > ORTHO_TOL:
                raise CertificateError("rotation is not orthonormal to 1e-12")
        if len(self) and np.max(np.linalg.norm(self.centers, axis=1)) > self.spec.region_radius:
            raise CertificateError("a centre lies outside the sampling region")

    def without(self, index: int) -> "CylinderRealization":
        keep = np.arange(len(self)) != index
        return CylinderRealization(self.spec, self.centers[keep], self.rotations[keep],
                                   self.bases[keep], self.sampling_region_mass)

    def with_cylinder(self, center, rotation, base: int) -> "CylinderRealization":
        return CylinderRealization(
            self.spec, np.vstack([self.centers, np.reshape(center, (1, -1))]),
            np.concatenate([self.rotations, np.reshape(rotation, (1, self.spec.d, self.spec.d))]),
            np.append(self.bases, int(base)), self.sampling_region_mass)

    def to_records(self) -> str:
        """Plain-text line records, one cylinder per line.

        Format: ``center=<c_1,...,c_(d-k)> rotation=<row-major d*d entries>
        base=<kind>:<size>`` with floats written by ``repr``. A header line
        starting with ``#`` gives ``d``, ``k`` and the count.
        """
        spec = self.spec
        lines = [f"# cylinders d={spec.d} k={spec.k} n={len(self)}"]
        for c, rot, b in zip(self.centers, self.rotations, self.bases):
            shape = spec.base.shapes[b]
            lines.append("center=" + ",".join(repr(float(v)) for v in c)
                         + " rotation=" + ",".join(repr(float(v)) for v in rot.ravel())
                         + f" base={shape.kind}:{shape.size!r}")
        return "\n".join(lines) + "\n"


def draw_cylinders(spec: CylinderModelSpec, gen: np.random.Generator, n: int):
    """``n`` i.i.d. cylinders from the restricted intensity (centre, rotation, base)."""
    m = spec.base_dim
    g = gen.standard_normal((n, m))
    g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-300)
    centers = g * spec.region_radius * gen.random((n, 1)) ** (1.0 / m)
    if spec.k == 0 or spec.direction == "fixed":
        rotations = np.broadcast_to(np.eye(spec.d), (n, spec.d, spec.d)).copy()
    else:
        rotations = np.array([random_rotation(gen, spec.d) for _ in range(n)]).reshape(n, spec.d, spec.d)
    bases = spec.base.sample(gen, n)
    return centers, rotations, bases


def sample_cylinders(spec: CylinderModelSpec, rng) -> CylinderRealization:
    """Poisson cylinders whose centres fall in the restriction ball."""
    gen = as_generator(rng)
    n = poisson_count(spec.expected_count, gen) if spec.gamma > 0 else 0
    centers, rotations, bases = draw_cylinders(spec, gen, n)
    return CylinderRealization(spec, centers, rotations, bases, spec.expected_count)


def cylinder_mask(points: np.ndarray, center, rotation, base: BaseShape, k: int) -> np.ndarray:
    """Which rows of ``points`` lie in one cylinder."""
    m = points.shape[1] - k
    y = points @ rotation[:, :m] - np.asarray(center)
    return base.contains(y)


def covered(p, realization: CylinderRealization, index: Optional[int] = None) -> np.ndarray:
    """Coverage of points by one cylinder (``index``) or by the union (brute force)."""
    pts = np.atleast_2d(np.asarray(p, dtype=float))
    spec = realization.spec
    if pts.shape[1] != spec.d:
        raise ValueError(f"points must have {spec.d} coordinates")
    idx = range(len(realization)) if index is None else [index]
    out = np.zeros(pts.shape[0], dtype=bool)
    for j in idx:
        out |= cylinder_mask(pts, realization.centers[j], realization.rotations[j],
                             spec.base.shapes[realization.bases[j]], spec.k)
    return out


class HitPoints:
    """Immutable uniform points in the window, shared across perturbed realizations.

    A k-d tree over the points (built on first use) lets each bounded grain of
    a ``k = 0`` model test only the points within its circumradius.
    """

    def __init__(self, window: Window, n_points: int, rng):
        if n_points < 1:
            raise ValueError("n_points must be >= 1")
        gen = as_generator(rng)
        self.window = window
        self.points = window.sample(gen, n_points)
        self.points.setflags(write=False)
        self._tree = None

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.points)
        return self._tree


BRUTE_CHUNK = 16_384


def _brute_masks(points: np.ndarray, realization: CylinderRealization, lo: int, hi: int) -> np.ndarray:
    """``(n_points, hi - lo)`` coverage by cylinders ``lo..hi-1``.

    Ball bases use ``|y - c|^2 = |p|^2 - |U^T p|^2 - 2 p . (B c) + |c|^2`` with
    ``B`` the base frame and ``U`` the cylinder directions, which needs only
    ``k + 1`` projections per cylinder. Other bases project onto ``B``.
    """
    spec = realization.spec
    m, k = spec.base_dim, spec.k
    rots = realization.rotations[lo:hi]
    centers = realization.centers[lo:hi]
    bases = realization.bases[lo:hi]
    out = np.empty((points.shape[0], hi - lo), dtype=bool)
    sq_norm = np.einsum("pd,pd->p", points, points)
    for b, shape in enumerate(spec.base.shapes):
        cols = np.flatnonzero(bases == b)
        if cols.size == 0:
            continue
        rot, c = rots[cols], centers[cols]
        if shape.kind == "ball":
            shift = np.einsum("cdm,cm->cd", rot[:, :, :m], c)         # B c in world coordinates
            acc = points @ shift.T
            acc *= -2.0
            acc += sq_norm[:, None]
            acc += np.einsum("cm,cm->c", c, c)
            for j in range(k):
                along = points @ rot[:, :, m + j].T
                along *= along
                acc -= along
            out[:, cols] = acc <= shape.size * shape.size
        else:
            worst = np.zeros((points.shape[0], cols.size))
            for j in range(m):
                y = points @ rot[:, :, j].T
                y -= c[:, j]
                np.abs(y, out=y)
                np.maximum(worst, y, out=worst)
            out[:, cols] = worst <= 0.5 * shape.size
    return out


def coverage_counts(realization: CylinderRealization, hits: HitPoints,
                    use_grid: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Number of cylinders covering each hit point, and the last one seen.

    Where the count is 1 the second array names the sole covering cylinder.
    ``use_grid`` selects the spatial index for ``k = 0``; the brute-force path
    tests every point against every cylinder and serves as its oracle.
    """
    spec = realization.spec
    pts = hits.points
    n_cyl = len(realization)
    counts = np.zeros(len(hits), dtype=np.int64)
    owner = np.full(len(hits), -1, dtype=np.int64)
    if n_cyl == 0:
        return counts, owner
    if use_grid and spec.k == 0:
        centres = np.einsum("cdm,cm->cd", realization.rotations, realization.centers)
        radii = np.array([spec.base.shapes[b].circumradius(spec.d) for b in realization.bases])
        near = hits.tree.query_ball_point(centres, radii * (1 + 1e-9) + 1e-12, return_sorted=True)
        for j, idx in enumerate(near):
            if not idx:
                continue
            idx = np.asarray(idx, dtype=np.int64)
            shape = spec.base.shapes[realization.bases[j]]
            mask = cylinder_mask(pts[idx], realization.centers[j], realization.rotations[j], shape, 0)
            idx = idx[mask]
            counts[idx] += 1
            owner[idx] = j
        return counts, owner
    step = max(1, BRUTE_CHUNK * 8 // max(n_cyl, 1))
    for start in range(0, len(hits), step):
        block = _brute_masks(pts[start:start + step], realization, 0, n_cyl)
        counts[start:start + step] = block.sum(axis=1)
        last = n_cyl - 1 - np.argmax(block[:, ::-1], axis=1)
        owner[start:start + step] = np.where(block.any(axis=1), last, -1)
    return counts, owner


@dataclass
class VolumeEstimate:
    value: float
    se: float
    n_points: int

    def __iter__(self):
        return iter((self.value, self.se))


def volume_in_window(realization: CylinderRealization, n_points: int = 10_000, rng=None,
                     hits: Optional[HitPoints] = None, use_grid: bool = True) -> VolumeEstimate:
    """Hit-or-miss estimate of ``l_d(Z cap W)``; pass ``hits`` to reuse a point set."""
    spec = realization.spec
    if hits is None:
        hits = HitPoints(spec.window, n_points, rng)
    vol = spec.window.volume
    if len(realization) == 0:
        return VolumeEstimate(0.0, 0.0, len(hits))
    counts, _ = coverage_counts(realization, hits, use_grid)
    p = float(np.mean(counts > 0))
    return VolumeEstimate(vol * p, vol * math.sqrt(p * (1 - p) / len(hits)), len(hits))


@dataclass
class CylinderCertificateReport:
    """Proxy estimates for one realization with their bounds."""

    v_plus: float
    v_plus_se: float
    bound_plus: float
    v_minus: float
    v_minus_se: float
    bound_minus: float
    remove_one: np.ndarray = field(repr=False)
    add_one: np.ndarray = field(repr=False)
    fubini_estimate: float = 0.0
    fubini_se: float = 0.0
    fubini_exact: float = 0.0
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def fubini_ok(self) -> bool:
        return abs(self.fubini_estimate - self.fubini_exact) <= 3.0 * self.fubini_se + 1e-12


def cylinder_proxy_certificates(realization: CylinderRealization, n_points: int = 20_000,
                                n_mu_samples: int = 200, rng=None,
                                strict: bool = False) -> CylinderCertificateReport:
    """Estimate the configuration part of ``V+`` and the intensity part of ``V-``.

    Remove-one and add-one differences are counted on one shared set of hit
    points, so each is an unbiased estimate of the exact difference and is
    non-negative by construction. The remove-one difference of cylinder
    ``j`` is the window volume times the fraction of points covered by ``j``
    alone. The add-one differences use fresh cylinders from the restricted
    intensity and feed ``V-`` as ``gamma * region volume * mean square``.
    The same draws give the Fubini check: the mean of
    ``region volume * l_d(Z(x, theta, K) cap W)`` estimates
    ``E l_(d-k)(Xi) l_d(W)``.
    """
    spec = realization.spec
    gen = as_generator(rng)
    hits = HitPoints(spec.window, n_points, gen)
    n = len(hits)
    vol = spec.window.volume
    unit = vol / n
    counts, owner = coverage_counts(realization, hits)
    sole = owner[counts == 1]
    removed = unit * np.bincount(sole, minlength=len(realization)).astype(float)
    q = removed / vol
    v_plus = float(np.sum(removed ** 2))
    # delta method: var(d_j^2) ~ 4 d_j^2 var(d_j), var(d_j) = vol^2 q(1-q)/n
    v_plus_se = float(math.sqrt(np.sum(4 * removed ** 2 * vol ** 2 * q * (1 - q) / n)))

    uncovered = counts == 0
    added = np.zeros(n_mu_samples)
    alone = np.zeros(n_mu_samples)
    if n_mu_samples:
        fresh = CylinderRealization(spec, *draw_cylinders(spec, gen, n_mu_samples), realization.sampling_region_mass)
        step = max(1, BRUTE_CHUNK * 8 // n_mu_samples)
        for start in range(0, n, step):
            block = _brute_masks(hits.points[start:start + step], fresh, 0, n_mu_samples)
            alone += unit * block.sum(axis=0)
            added += unit * block[uncovered[start:start + step]].sum(axis=0)
    region = spec.region_volume
    mass = spec.gamma * region
    sq = added ** 2
    v_minus = mass * float(sq.mean()) if n_mu_samples else 0.0
    v_minus_se = mass * float(sq.std(ddof=1)) / math.sqrt(n_mu_samples) if n_mu_samples > 1 else 0.0

    fub = region * alone
    fub_est = float(fub.mean()) if n_mu_samples else 0.0
    fub_se = float(fub.std(ddof=1)) / math.sqrt(n_mu_samples) if n_mu_samples > 1 else 0.0
    fub_exact = spec.base.mean_volume(spec.base_dim) * vol

    b_plus, b_minus = spec.bound_scales()
    violations = []
    if v_plus > b_plus + 3 * v_plus_se:
        violations.append(f"V+ = {v_plus!r} exceeds {b_plus!r}")
    if v_minus > b_minus + 3 * v_minus_se:
        violations.append(f"V- = {v_minus!r} exceeds {b_minus!r}")
    if removed.size and removed.min() < 0:
        violations.append("negative remove-one difference")
    if added.size and added.min() < 0:
        violations.append("negative add-one difference")
    report = CylinderCertificateReport(v_plus, v_plus_se, b_plus, v_minus, v_minus_se, b_minus,
                                       removed, added, fub_est, fub_se, fub_exact, violations)
    if strict and violations:
        raise CertificateError("; ".join(violations))
    return report


def elementary_gap(x) -> np.ndarray:
    """``(1 + x) log(1 + x) - x - x^2 / (2 (1 + x/3))``; non-negative for ``x >= 0``."""
    x = np.asarray(x, dtype=float)
    return (1 + x) * np.log1p(x) - x - 0.5 * x * x / (1 + x / 3)


@dataclass
class ComparisonTable:
    t: list
    proxy_bound: list
    comparison_bound: list
    ratio: list
    asserted: list
    mean: float
    window_volume: float
    a: float
    p: float
    elementary_min_gap: float
    constant_chain: tuple

    @property
    def comparison_never_larger(self) -> bool:
        return all(c <= b * (1 + 1e-12) for c, b in zip(self.comparison_bound, self.proxy_bound))

    @property
    def n_asserted(self) -> int:
        return sum(self.asserted)

    @property
    def elementary_holds(self) -> bool:
        return self.elementary_min_gap >= -1e-12

    @property
    def constant_chain_holds(self) -> bool:
        lhs, two, inv_c = self.constant_chain
        return lhs <= two < inv_c

    def rows(self) -> list[dict]:
        return [{"t": t, "proxy_bound": b, "comparison_bound": c, "ratio": r, "t_at_least_4sqrt_kappa": s}
                for t, b, c, r, s in zip(self.t, self.proxy_bound, self.comparison_bound,
                                         self.ratio, self.asserted)]


def compare_bounds(spec: CylinderModelSpec, t_grid: Optional[Sequence[float]] = None,
                   n_grid: int = 200) -> ComparisonTable:
    """Upper-tail bound of the proxy method against ``exp(-t^2 / (2a(E F + t/3)))``.

    Deviations beyond ``l_d(W) - E F`` have probability zero, so the table
    covers ``0 <= t <= l_d(W) - E F`` (the default grid includes
    ``4 sqrt(kappa)`` when it is in range). The proxy bound is only asserted
    for ``t >= 4 sqrt(kappa)``; rows below are flagged, and the comparison of
    the two expressions is recorded for every row. Needs ball bases and a
    ball window.
    """
    if len(spec.base.shapes) != 1 or spec.base.shapes[0].kind != "ball" or spec.window.kind != "ball":
        raise ConfigurationError("comparison needs ball bases and a ball window", field="base")
    mean = spec.mean_volume()
    vol = spec.window.volume
    a = spec.A * spec.window.diameter ** spec.k
    upper = vol - mean
    if t_grid is None:
        t_grid = list(np.linspace(0.0, upper, n_grid))
        if T_MIN <= upper:
            t_grid = sorted(set(t_grid) | {T_MIN})
    t_vals = [float(t) for t in t_grid if 0.0 <= t <= upper]
    prop = [math.exp(-C_ONE_SIDED * t * t / (a * vol)) for t in t_vals]
    comp = [math.exp(-t * t / (2 * a * (mean + t / 3))) if t > 0 else 1.0 for t in t_vals]
    ratio = [c / b for c, b in zip(comp, prop)]
    asserted = [t >= T_MIN for t in t_vals]
    x = np.linspace(0.0, 100.0, 100_001)
    p = mean / vol
    chain = ((2.0 / 3.0) * (2 * p + 1), 2.0, 1.0 / C_ONE_SIDED)
    return ComparisonTable(t_vals, prop, comp, ratio, asserted, mean, vol, a, p,
                           float(elementary_gap(x).min()), chain)


def cylinder_bound_spec(spec: CylinderModelSpec, tail: str = "upper_tail") -> BoundSpec:
    upper, lower = spec.bound_scales()
    if tail == "upper_tail":
        return BoundSpec(tail, upper)
    if tail == "lower_tail":
        if lower <= 0:
            raise ConfigurationError("lower-tail bound needs gamma > 0", field="gamma")
        return BoundSpec(tail, lower)
    raise ConfigurationError(f"tail must be upper_tail or lower_tail, got {tail!r}", field="tail")


def run_cylinder_concentration(spec: CylinderModelSpec, n_reps: int, t_grid: Sequence[float], rng,
                               tail: str = "upper_tail", n_points: int = 10_000,
                               workers: int = 1) -> TailReport:
    """Empirical tail of the covered volume against the proxy bound, centred at the exact mean."""
    bound = cylinder_bound_spec(spec, tail)

    def sampler(gen):
        real = sample_cylinders(spec, gen)
        return volume_in_window(real, n_points, gen).value

    return verify_tail(sampler, bound, n_reps, rng, t_grid, mean=spec.mean_volume(), workers=workers)
