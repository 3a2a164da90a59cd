"""Convex bodies and the two Poisson point models on them.

Model ``In`` puts Poisson points uniformly inside the body; model ``Bd`` puts
them on the boundary according to surface measure. Both are normalised to a
probability measure, so ``gamma`` is the expected number of points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from ..errors import ConfigurationError
from ..poisson import IntensitySpec, PointConfiguration, sample_poisson
from .hull import SimplicialHull
from .intrinsic import (ball_intrinsic_volume, cube_intrinsic_volume,
                        ellipsoid_intrinsic_volume, intrinsic_volume,
                        unit_ball_volume)

KINDS = ("ball", "cube", "ellipsoid", "polytope")
MODELS = ("In", "Bd")
MIN_DIM, MAX_DIM = 2, 6


def _unit_vectors(gen: np.random.Generator, n: int, d: int) -> np.ndarray:
    g = gen.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass(frozen=True)
class ConvexBodySpec:
    """A convex body ``K`` in ``R^d``, centred at the origin except for polytopes.

    ``radius`` is used by balls, ``side`` by cubes (``[-side/2, side/2]^d``),
    ``semi_axes`` by axis-aligned ellipsoids and ``vertices`` by polytopes.
    """

    kind: str
    dim: int
    radius: float = 1.0
    side: float = 1.0
    semi_axes: Optional[tuple[float, ...]] = None
    vertices: Optional[tuple[tuple[float, ...], ...]] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"kind must be one of {KINDS}, got {self.kind!r}", field="kind")
        if not isinstance(self.dim, (int, np.integer)) or not MIN_DIM <= self.dim <= MAX_DIM:
            raise ConfigurationError(f"dim must be an integer in [{MIN_DIM}, {MAX_DIM}], got {self.dim!r}",
                                     field="dim")
        if self.kind == "ball" and not self.radius > 0:
            raise ConfigurationError("radius must be positive", field="radius")
        if self.kind == "cube" and not self.side > 0:
            raise ConfigurationError("side must be positive", field="side")
        if self.kind == "ellipsoid":
            axes = self.semi_axes
            if axes is None or len(axes) != self.dim or min(axes) <= 0:
                raise ConfigurationError(f"semi_axes must be {self.dim} positive numbers", field="semi_axes")
        if self.kind == "polytope":
            if self.vertices is None:
                raise ConfigurationError("polytope needs vertices", field="vertices")
            v = np.asarray(self.vertices, dtype=float)
            if v.ndim != 2 or v.shape[1] != self.dim:
                raise ConfigurationError(f"vertices must have {self.dim} coordinates", field="vertices")
            if not self._hull.is_full_dimensional:
                raise ConfigurationError("polytope must have positive volume", field="vertices")

    @classmethod
    def ball(cls, dim: int, radius: float = 1.0) -> "ConvexBodySpec":
        return cls("ball", dim, radius=float(radius))

    @classmethod
    def cube(cls, dim: int, side: float = 1.0) -> "ConvexBodySpec":
        return cls("cube", dim, side=float(side))

    @classmethod
    def ellipsoid(cls, semi_axes) -> "ConvexBodySpec":
        axes = tuple(float(a) for a in semi_axes)
        return cls("ellipsoid", len(axes), semi_axes=axes)

    @classmethod
    def polytope(cls, vertices) -> "ConvexBodySpec":
        v = np.asarray(vertices, dtype=float)
        return cls("polytope", int(v.shape[1]), vertices=tuple(tuple(r) for r in v))

    @cached_property
    def _hull(self) -> SimplicialHull:
        return SimplicialHull(np.asarray(self.vertices, dtype=float))

    @property
    def supports_boundary_model(self) -> bool:
        return self.kind in ("ball", "ellipsoid")

    @cached_property
    def volume(self) -> float:
        d = self.dim
        if self.kind == "ball":
            return unit_ball_volume(d) * self.radius ** d
        if self.kind == "cube":
            return self.side ** d
        if self.kind == "ellipsoid":
            return unit_ball_volume(d) * float(np.prod(self.semi_axes))
        return self._hull.volume

    def intrinsic_volume_estimate(self, i: int) -> tuple[float, float]:
        """``(V_i(K), SE)``; the SE is 0 except for ellipsoids and some polytope orders."""
        if not 0 <= i <= self.dim:
            raise ValueError(f"i must lie in [0, {self.dim}], got {i}")
        if self.kind == "ball":
            return ball_intrinsic_volume(self.dim, i, self.radius), 0.0
        if self.kind == "cube":
            return cube_intrinsic_volume(self.dim, i, self.side), 0.0
        if self.kind == "ellipsoid":
            return tuple(ellipsoid_intrinsic_volume(self.semi_axes, i))
        return tuple(intrinsic_volume(self._hull, i, n_angle_samples=100_000, rng=0))

    def intrinsic_volume(self, i: int) -> float:
        return self.intrinsic_volume_estimate(i)[0]

    @property
    def surface_area(self) -> float:
        return 2.0 * self.intrinsic_volume(self.dim - 1)

    @property
    def circumradius(self) -> float:
        """Radius of a ball about the origin containing ``K``."""
        if self.kind == "ball":
            return self.radius
        if self.kind == "cube":
            return 0.5 * self.side * math.sqrt(self.dim)
        if self.kind == "ellipsoid":
            return max(self.semi_axes)
        return float(np.max(np.linalg.norm(np.asarray(self.vertices), axis=1)))

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        x = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "ball":
            return np.linalg.norm(x, axis=1) <= self.radius + tol
        if self.kind == "cube":
            return np.all(np.abs(x) <= 0.5 * self.side + tol, axis=1)
        if self.kind == "ellipsoid":
            return np.sum((x / np.asarray(self.semi_axes)) ** 2, axis=1) <= 1.0 + tol
        return self._hull.contains(x, tol)

    def sample_interior(self, gen: np.random.Generator, n: int) -> np.ndarray:
        """``n`` uniform points in ``K``."""
        d = self.dim
        if self.kind in ("ball", "ellipsoid"):
            u = _unit_vectors(gen, n, d) * gen.random((n, 1)) ** (1.0 / d)
            scale = self.radius if self.kind == "ball" else np.asarray(self.semi_axes)
            return u * scale
        if self.kind == "cube":
            return (gen.random((n, d)) - 0.5) * self.side
        # polytope: pick a simplex of the centroid fan by volume, then Dirichlet weights
        hull = self._hull
        centre = hull.local[hull.vertices].mean(axis=0)
        tri = np.array(hull._triangles)
        simplices = np.concatenate([hull.local[tri], np.broadcast_to(centre, (len(tri), 1, d))], axis=1)
        vols = np.abs(np.linalg.det(simplices[:, :-1] - simplices[:, -1:]))
        which = gen.choice(len(tri), size=n, p=vols / vols.sum())
        w = gen.dirichlet(np.ones(d + 1), size=n)
        local = np.einsum("nk,nkj->nj", w, simplices[which])
        return hull.origin + local @ hull.basis.T

    def sample_boundary(self, gen: np.random.Generator, n: int) -> np.ndarray:
        """``n`` points from normalised surface measure on ``bd K`` (balls and ellipsoids).

        For an ellipsoid, ``u -> a * u`` maps the sphere onto the boundary with
        surface element proportional to ``|u / a|``; sphere proposals are kept
        with probability ``|u / a| / max(1 / a)``.
        """
        if not self.supports_boundary_model:
            raise ConfigurationError(f"boundary model needs a ball or ellipsoid, got {self.kind}",
                                     field="kind")
        d = self.dim
        if self.kind == "ball":
            return _unit_vectors(gen, n, d) * self.radius
        a = np.asarray(self.semi_axes)
        bound = 1.0 / a.min()
        out = np.empty((0, d))
        while out.shape[0] < n:
            want = n - out.shape[0]
            m = max(16, int(1.5 * want * bound * a.max()))
            u = _unit_vectors(gen, m, d)
            keep = gen.random(m) * bound <= np.linalg.norm(u / a, axis=1)
            out = np.vstack([out, u[keep] * a])
        return out[:n]

    def intensity(self, model: str, gamma: float) -> IntensitySpec:
        """Intensity measure ``gamma * (normalised Lebesgue on K or surface measure on bd K)``."""
        if model not in MODELS:
            raise ConfigurationError(f"model must be one of {MODELS}, got {model!r}", field="model")
        if model == "Bd" and not self.supports_boundary_model:
            raise ConfigurationError(
                f"model Bd needs a ball or ellipsoid body, got {self.kind}", field="model")
        sampler = self.sample_interior if model == "In" else self.sample_boundary
        return IntensitySpec(float(gamma), sampler, self.dim,
                             description=f"{model} on {self.kind} in R^{self.dim}")


def sample_model(body: ConvexBodySpec, model: str, gamma: float, rng) -> PointConfiguration:
    """Poisson process with intensity ``gamma`` times the model's probability measure."""
    return sample_poisson(body.intensity(model, gamma), rng)
